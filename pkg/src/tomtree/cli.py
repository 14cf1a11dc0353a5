"""Command-line surface: simulate, encode/decode, truncate, xi, dist,
levy sample, and the statistical test battery.

Exit codes: 0 ok, 1 validation/input error, 2 statistical-test failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

from . import chrono, contour, io as tio, laws, levy, splitting

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TEST_FAILED = 2


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _load_any_contour(path: str):
    if path.endswith(".jsonl"):
        return contour.encode(tio.load_tree(path))
    return tio.load_contour(path)


def _plot_contour_and_tree(c, tree, out_svg):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    ax = axes[0]
    t = 0.0
    for p in c.prims:
        if isinstance(p, contour.Jump):
            ax.plot([t, t], [p.bottom, p.top], lw=1.8)
        else:
            dur = (p.top - p.bottom) / p.rate
            ax.plot([t, t + dur], [p.top, p.bottom], lw=1.8)
            t += dur
    ax.set_xlabel("exploration time")
    ax.set_ylabel("height")
    ax.set_title("contour")

    ax = axes[1]
    order = chrono.exploration_order(tree)
    xs = {k: i for i, k in enumerate(order)}
    for k in order:
        ind = tree.individuals[k]
        x = xs[k]
        ax.plot([x, x], [ind.birth, ind.death], lw=2.0, color="C0")
        if ind.parent is not None:
            ax.plot([xs[ind.parent], x], [ind.birth, ind.birth], ls=":", color="C1")
    ax.set_xlabel("individual (exploration order)")
    ax.set_ylabel("height")
    ax.set_title("chronological tree")
    fig.tight_layout()
    fig.savefig(out_svg, format="svg")
    plt.close(fig)


def _cmd_simulate(args):
    rng = levy.rng_from(args.seed)
    lifetime = laws.parse_law(args.lifetime)
    root = laws.parse_law(args.root_lifetime) if args.root_lifetime else lifetime
    r = math.inf if args.r_trunc is None else args.r_trunc
    tree = levy.simulate_splitting_tree(args.birth_rate, lifetime, root, r, rng)
    tio.save_tree(tree, args.out)
    _say(args, f"wrote {len(tree)} individuals to {args.out}")
    if args.plot:
        _plot_contour_and_tree(contour.encode(tree), tree, args.plot)
    return EXIT_OK


def _cmd_encode(args):
    tree = tio.load_tree(args.tree)
    c = contour.encode(tree)
    tio.save_contour(c, args.out)
    _say(args, f"wrote contour ({c.jump_count} jumps, duration {c.duration!r}) to {args.out}")
    if args.plot:
        _plot_contour_and_tree(c, tree, args.plot)
    return EXIT_OK


def _cmd_decode(args):
    c = tio.load_contour(args.contour)
    tree = contour.decode(c)
    tio.save_tree(tree, args.out)
    _say(args, f"wrote {len(tree)} individuals to {args.out}")
    return EXIT_OK


def _cmd_truncate(args):
    if args.r is None or args.r <= 0:
        print("error: truncation level must be positive", file=sys.stderr)
        return EXIT_INVALID
    if args.input.endswith(".jsonl"):
        tree = tio.load_tree(args.input)
        tio.save_tree(chrono.truncate(tree, args.r), args.out)
    else:
        c = tio.load_contour(args.input)
        tio.save_contour(contour.time_change(c, args.r), args.out)
    _say(args, f"wrote {args.out}")
    return EXIT_OK


def _cmd_xi(args):
    if args.input.endswith(".jsonl"):
        tree = tio.load_tree(args.input)
        xi = splitting.xi_extract(tree, args.t, args.r)
    else:
        c = tio.load_contour(args.input)
        xi = splitting.xi_from_contour(c, args.t, args.r)
    if args.format == "jsonl":
        import json

        with open(args.out, "w") as fh:
            for depth, sub in xi.atoms:
                rec = {
                    "depth": depth,
                    "individuals": [
                        {"id": i.id, "parent": i.parent, "birth": i.birth,
                         "death": i.death, "speed": i.speed}
                        for i in sorted(sub.individuals.values(), key=lambda x: x.id)
                    ],
                }
                fh.write(json.dumps(rec) + "\n")
    else:
        with open(args.out, "w") as fh:
            writer = csv.writer(fh)
            writer.writerow(["depth", "individuals", "total_length", "measure"])
            for depth, sub in xi.atoms:
                total_len = sum(i.lifetime for i in sub.individuals.values())
                writer.writerow([repr(depth), len(sub), repr(total_len),
                                 repr(sub.total_measure)])
    _say(args, f"wrote {len(xi)} atoms to {args.out}")
    return EXIT_OK


def _cmd_dist(args):
    c1 = _load_any_contour(args.a)
    c2 = _load_any_contour(args.b)
    print(repr(contour.contour_distance(c1, c2)))
    return EXIT_OK


def _cmd_levy_sample(args):
    law = laws.parse_law(args.jump_law) if args.jump_law else None
    params = levy.LevyParams(
        drift=args.drift, jump_rate=args.jump_rate, jump_law=law,
        kappa=args.kappa, beta=args.beta,
    )
    rng = levy.rng_from(args.seed)
    path = levy.sample_path(params, args.x0, args.horizon, rng, step=args.step)
    tio.save_path(path, args.out)
    _say(args, f"wrote {len(path.times)} breakpoints to {args.out}")
    return EXIT_OK


def _write_reports(reports, out):
    with open(out, "w") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test", "statistic", "value", "p_value", "n", "pass"])
        for rep in reports:
            writer.writerow(rep.row())
            for sub in rep.details:
                writer.writerow(sub.row())


def config_from_argv(argv) -> dict:
    """Flat key=value form of a command line (numbered to keep order)."""
    return {f"arg.{i:03d}": str(tok) for i, tok in enumerate(argv)}


def argv_from_config(cfg: dict):
    return [cfg[k] for k in sorted(cfg) if k.startswith("arg.")]


def _cmd_run(args):
    cfg = tio.load_config(args.config)
    argv = argv_from_config(cfg)
    if not argv:
        print("error: empty config", file=sys.stderr)
        return EXIT_INVALID
    return main(argv)


def _cmd_test(args):
    exp2 = laws.Exponential(2.0)
    reports = []
    if args.which == "splitting":
        rep = splitting.poisson_splitting_test(
            birth_rate=1.0, lifetime_law=exp2, root_lifetime=exp2,
            t=0.5, r=math.inf, depth_bins=4, n_replicates=args.n, seed=args.seed,
            null_rate=args.null_rate,
        )
        reports.append(rep)
    elif args.which == "consistency":
        params = levy.LevyParams(drift=1.0, jump_rate=1.0, jump_law=exp2)
        rep = splitting.timechange_consistency_test(
            params, x=1.0, r1=2.0, r2=4.0, times=(0.5, 1.5), n=args.n,
            seed=args.seed,
        )
        reports.append(rep)
    elif args.which == "sojourn":
        rng = levy.rng_from(args.seed)
        worst = 0.0
        for i in range(max(10, args.n // 100)):
            tree = levy.simulate_splitting_tree(1.0, exp2, exp2, math.inf,
                                                levy.rng_from(args.seed, i))
            worst = max(worst, splitting.sojourn_check(tree, 1.0, seed=args.seed))
        reports.append(splitting.TestReport(
            "sojourn", "max_deviation", worst, 1.0 if worst <= 1e-9 else 0.0,
            args.n, worst <= 1e-9, args.seed,
        ))
    elif args.which == "binary":
        ok = True
        worst = 1
        for i in range(max(10, args.n // 100)):
            tree = levy.simulate_splitting_tree(1.0, exp2, exp2, math.inf,
                                                levy.rng_from(args.seed, i))
            rep = splitting.binary_and_class_check(tree, contour.encode(tree))
            ok = ok and rep.passed
            worst = max(worst, rep.max_class_size)
        reports.append(splitting.TestReport(
            "binary", "max_class_size", float(worst), 1.0 if ok else 0.0,
            args.n, ok, args.seed,
        ))
    if args.out:
        _write_reports(reports, args.out)
    if args.plot:
        _plot_test_curves(reports, args.plot)
    for rep in reports:
        _say(args, f"{rep.name}: {'pass' if rep.passed else 'FAIL'} (p={rep.p_value:.5f})")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_TEST_FAILED


def _plot_test_curves(reports, out_svg):
    """Empirical distribution curves of the test samples, against theory."""
    import numpy as np
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for rep in reports:
        for label, sample in rep.curves:
            if not sample:
                continue
            xs = np.sort(np.asarray(sample))
            ys = np.arange(1, xs.size + 1) / xs.size
            ax.step(xs, ys, where="post", label=label, lw=1.2)
            plotted = True
            if "uniform" in label:
                ax.plot([0, 1], [0, 1], "k--", lw=0.8, label="U(0,1)")
    if not plotted:
        ax.text(0.5, 0.5, "no curve data", ha="center")
    ax.set_xlabel("value")
    ax.set_ylabel("ECDF")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_svg, format="svg")
    plt.close(fig)


def build_parser():
    ap = argparse.ArgumentParser(prog="tomtree")
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--format", choices=["csv", "jsonl"], default="csv",
                    help="output format where a command supports both")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a splitting tree")
    sim.add_argument("--birth-rate", type=float, required=True)
    sim.add_argument("--lifetime", required=True, help="exp:theta | fixed:x | table:...")
    sim.add_argument("--root-lifetime", default=None)
    sim.add_argument("--r-trunc", type=float, default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--plot", default=None, help="optional SVG output")
    sim.set_defaults(func=_cmd_simulate)

    enc = sub.add_parser("encode", help="tree JSONL -> contour CSV")
    enc.add_argument("tree")
    enc.add_argument("--out", required=True)
    enc.add_argument("--plot", default=None)
    enc.set_defaults(func=_cmd_encode)

    dec = sub.add_parser("decode", help="contour CSV -> tree JSONL")
    dec.add_argument("contour")
    dec.add_argument("--out", required=True)
    dec.set_defaults(func=_cmd_decode)

    tr = sub.add_parser("truncate", help="truncate a tree or time-change a contour")
    tr.add_argument("input")
    tr.add_argument("--r", type=float, required=True)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=_cmd_truncate)

    xi = sub.add_parser("xi", help="right-subtree measure atoms")
    xi.add_argument("input")
    xi.add_argument("--t", type=float, required=True)
    xi.add_argument("--r", type=float, default=math.inf)
    xi.add_argument("--out", required=True)
    xi.set_defaults(func=_cmd_xi)

    ds = sub.add_parser("dist", help="upper bound on the contour distance")
    ds.add_argument("a")
    ds.add_argument("b")
    ds.set_defaults(func=_cmd_dist)

    lv = sub.add_parser("levy", help="Levy process utilities")
    lvsub = lv.add_subparsers(dest="levy_command", required=True)
    ls = lvsub.add_parser("sample", help="sample a spectrally positive path")
    ls.add_argument("--drift", type=float, required=True)
    ls.add_argument("--jump-rate", type=float, default=0.0)
    ls.add_argument("--jump-law", default=None)
    ls.add_argument("--kappa", type=float, default=0.0)
    ls.add_argument("--beta", type=float, default=0.0)
    ls.add_argument("--x0", type=float, required=True)
    ls.add_argument("--horizon", type=float, required=True)
    ls.add_argument("--step", type=float, default=None)
    ls.add_argument("--seed", type=int, default=0)
    ls.add_argument("--out", required=True)
    ls.set_defaults(func=_cmd_levy_sample)

    ts = sub.add_parser("test", help="statistical verification battery")
    ts.add_argument("which", choices=["splitting", "consistency", "sojourn", "binary"])
    ts.add_argument("--seed", type=int, default=1)
    ts.add_argument("--n", type=int, default=2000)
    ts.add_argument("--out", default=None)
    ts.add_argument("--null-rate", type=float, default=None,
                    help="override the tested rate (negative controls)")
    ts.add_argument("--plot", default=None, help="optional SVG of the test curves")
    ts.set_defaults(func=_cmd_test)

    rn = sub.add_parser("run", help="replay a saved experiment config")
    rn.add_argument("config")
    rn.set_defaults(func=_cmd_run)

    return ap


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    save_config_to = None
    if "--save-config" in argv:
        i = argv.index("--save-config")
        try:
            save_config_to = argv[i + 1]
        except IndexError:
            print("error: --save-config needs a path", file=sys.stderr)
            return EXIT_INVALID
        del argv[i:i + 2]
    ap = build_parser()
    args = ap.parse_args(argv)
    if save_config_to is not None:
        tio.save_config(config_from_argv(argv), save_config_to)
    try:
        return args.func(args)
    except (chrono.InvalidTreeError, chrono.InvalidPointError,
            contour.InvalidContourError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except levy.SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
