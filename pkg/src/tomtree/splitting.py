"""Right-subtree point measures, splitting-property tests, and consistency checks.

The measure Xi collects, along the ancestral line of the point explored at
time t in the tree truncated at r, the subtrees hanging to the right of the
line, each tagged with its attachment depth.  It is computed two independent
ways: structurally on the tree, and through the excursions of the truncated
contour above its running minimum; the two must agree exactly.

The statistical tests are deterministic given their seed and use exact
conditional transforms (truncated-exponential PIT, conditional uniformity)
so that their null distributions hold at any sample size.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .chrono import (
    ChronoTree,
    PointRef,
    _ancestor_chain,
    canonical_serialization,
    explore,
    subtree_rooted,
    truncate,
)
from .contour import (
    PLJContour,
    Jump,
    decode,
    encode,
    excursions_above_min,
    time_change,
)
from .levy import (
    LevyParams,
    SimulationError,
    excise_above,
    reflect_below,
    rng_from,
    sample_path,
    simulate_splitting_tree,
)

__all__ = [
    "XiMeasure",
    "TestReport",
    "xi_extract",
    "xi_from_contour",
    "xi_multisets_equal",
    "poisson_splitting_test",
    "timechange_consistency_test",
    "sojourn_check",
    "path_measure",
    "binary_and_class_check",
    "consistent_family",
]


@dataclass(frozen=True)
class XiMeasure:
    """Finite point measure of (attachment depth, right subtree) atoms."""

    atoms: Tuple[Tuple[float, ChronoTree], ...]

    def __len__(self):
        return len(self.atoms)

    @property
    def depths(self):
        return [d for d, _ in self.atoms]

    def canonical(self):
        return tuple(sorted((d, canonical_serialization(s)) for d, s in self.atoms))


def xi_multisets_equal(a: XiMeasure, b: XiMeasure) -> bool:
    return a.canonical() == b.canonical()


@dataclass(frozen=True)
class TestReport:
    """One statistical verdict; deterministic given the seed."""

    name: str
    statistic: str
    value: float
    p_value: float
    n: int
    passed: bool
    seed: int
    details: tuple = ()
    curves: tuple = ()  # (label, sample) pairs for empirical-vs-theory plots

    def row(self):
        return [self.name, self.statistic, self.value, self.p_value, self.n,
                int(self.passed)]


# -- Xi two ways ------------------------------------------------------------


def xi_extract(tree: ChronoTree, t: float, r: float = math.inf) -> XiMeasure:
    """Xi_t^r read off the tree: right subtrees along the ancestral line.

    Atoms are the children hanging off [rho, phi(t)) strictly below the
    line's entry heights, re-rooted at their attachment points.
    """
    trunc = truncate(tree, r) if not math.isinf(r) else tree
    trunc.require_valid()
    if not trunc.total_measure > t:
        raise ValueError("t beyond the truncated tree's measure")
    p = explore(trunc, t)
    atoms = []
    for k, top in _ancestor_chain(trunc, p):
        for c in trunc.children(k):
            child = trunc.individuals[c]
            if child.birth < top:
                sub = subtree_rooted(trunc, PointRef(c, child.birth))
                atoms.append((child.birth, sub))
    atoms.sort(key=lambda a: a[0])
    return XiMeasure(tuple(atoms))


def xi_from_contour(c: PLJContour, t: float, r: float = math.inf) -> XiMeasure:
    """Xi_t^r read off the contour: excursions above the running minimum.

    Runs the decomposition of the truncated contour from the supremum of the
    class of t (which for piecewise-linear contours is t itself: the contour
    strictly decreases right after every time); each excursion's level is
    the depth and its path decodes to the subtree.
    """
    ct = time_change(c, r) if not math.isinf(r) else c
    if not ct.duration > t:
        raise ValueError("t beyond the truncated contour's duration")
    atoms = []
    for exc in excursions_above_min(ct, t):
        atoms.append((exc.level, decode(exc.path)))
    atoms.sort(key=lambda a: a[0])
    return XiMeasure(tuple(atoms))


# -- splitting-property test -------------------------------------------------


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TOMTREE_THREADS", "1")))
    except ValueError:
        return 1


def _splitting_replicate(args):
    (birth_rate, lifetime_law, root_lifetime, t, r, seed, idx) = args
    rng = rng_from(seed, idx)
    tree = simulate_splitting_tree(birth_rate, lifetime_law, root_lifetime, r, rng)
    trunc = truncate(tree, r) if not math.isinf(r) else tree
    if not trunc.total_measure > t:
        return None
    x_t = explore(trunc, t).height
    xi = xi_extract(tree, t, r)
    return x_t, tuple(xi.depths)


def poisson_splitting_test(
    birth_rate: float,
    lifetime_law,
    root_lifetime,
    t: float,
    r: float,
    depth_bins: int,
    n_replicates: int,
    seed: int,
    null_rate: Optional[float] = None,
    p_threshold: float = 0.001,
) -> TestReport:
    """Test that Xi_t^r atom depths form a Poisson process of rate birth_rate.

    Simulates trees conditioned on total measure > t by rejection, then runs

    (a) a chi-square goodness-of-fit of per-bin atom counts against
        Poisson(rate * bin width), pooling, for each bin [a, b), the
        replicates with X_t >= b (an X_t-measurable selection, so the
        conditional law is unchanged), and
    (b) a KS test of the successive depth spacings transformed by the
        truncated-exponential probability integral transform, which is
        exactly uniform under the null at any sample size.

    ``null_rate`` overrides the tested rate (for negative controls).
    """
    lam = birth_rate if null_rate is None else null_rate
    attempts = max(4 * n_replicates, n_replicates + 100)
    jobs = [
        (birth_rate, lifetime_law, root_lifetime, t, r, seed, i)
        for i in range(attempts)
    ]
    threads = _threads()
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_splitting_replicate, jobs, chunksize=64))
    else:
        results = [_splitting_replicate(j) for j in jobs]
    accepted = [res for res in results if res is not None][:n_replicates]
    if len(accepted) < 100:
        raise SimulationError(
            f"only {len(accepted)} replicates satisfied the conditioning"
        )
    n = len(accepted)

    total_atoms = sum(len(d) for _, d in accepted)
    if birth_rate == 0:
        return TestReport(
            name="splitting", statistic="no atoms, vacuous pass", value=0.0,
            p_value=1.0, n=n, passed=True, seed=seed,
        )

    # (a) binned counts vs Poisson(lam * width)
    width = 0.5 / lam
    edges = [k * width for k in range(depth_bins + 1)]
    counts = []
    for x_t, depths in accepted:
        for a, b in zip(edges, edges[1:]):
            if x_t >= b:
                counts.append(sum(1 for d in depths if a <= d < b))
    p_counts, stat_counts = _poisson_gof(np.asarray(counts), lam * width)

    # (b) spacings via the truncated-exponential PIT
    pit = []
    for x_t, depths in accepted:
        prev = 0.0
        for d in depths:
            gap = d - prev
            rem = x_t - prev
            denom = -math.expm1(-lam * rem)
            if denom > 0:
                pit.append(-math.expm1(-lam * gap) / denom)
            prev = d
    if pit:
        ks = stats.kstest(pit, "uniform")
        p_spacing, stat_spacing = float(ks.pvalue), float(ks.statistic)
    else:
        p_spacing, stat_spacing = 1.0, 0.0

    p_min = min(p_counts, p_spacing)
    details = (
        TestReport("splitting.counts", "chi2_gof", stat_counts, p_counts,
                   len(counts), p_counts > p_threshold, seed),
        TestReport("splitting.spacings", "ks", stat_spacing, p_spacing,
                   len(pit), p_spacing > p_threshold, seed),
    )
    return TestReport(
        name="splitting", statistic="min_p", value=float(total_atoms),
        p_value=p_min, n=n, passed=p_min > p_threshold, seed=seed,
        details=details,
        curves=(("spacing_pit_vs_uniform", tuple(pit)),),
    )


def _poisson_gof(counts: np.ndarray, mean: float):
    """Chi-square GOF of iid counts against Poisson(mean); (p, statistic)."""
    n = counts.size
    if n == 0:
        return 1.0, 0.0
    kmax = int(counts.max())
    # pool the upper tail so every expected cell is >= 5
    probs = [math.exp(-mean) * mean**k / math.factorial(k) for k in range(kmax + 1)]
    probs.append(max(1.0 - sum(probs), 0.0))
    expected = np.array(probs) * n
    observed = np.bincount(counts, minlength=kmax + 2).astype(float)
    while expected.size > 2 and (expected[-1] < 5 or expected[-2] < 5):
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected = expected[:-1]
        observed = observed[:-1]
    expected *= observed.sum() / expected.sum()
    res = stats.chisquare(observed, expected)
    return float(res.pvalue), float(res.statistic)


# -- time-change consistency -------------------------------------------------


def _reflected_marginals(p, x, r_reflect, r_excise, times, n, seed, arm):
    """Marginals of the r_reflect-reflected path, optionally excised at r_excise."""
    out = np.empty((len(times), n))
    tmax = max(times)
    for i in range(n):
        horizon = 4.0 * tmax + 1.0
        for attempt in range(20):
            rng = rng_from(seed, arm, i, attempt)
            raw = sample_path(p, x, horizon, rng)
            path = reflect_below(raw, r_reflect)
            if r_excise is not None:
                path = excise_above(path, r_excise)
            if path.horizon >= tmax:
                break
            horizon *= 2.0
        else:
            raise SimulationError("could not cover the requested times")
        for j, tt in enumerate(times):
            out[j, i] = path.value(tt)
    return out


def timechange_consistency_test(
    p: LevyParams,
    x: float,
    r1: float,
    r2: float,
    times: Sequence[float],
    n: int,
    seed: int,
    p_threshold: float = 0.001,
) -> TestReport:
    """Two-sample KS check that X o C^{r1} under P_x^{r2} has law P_x^{r1}.

    Arm one reflects below r2 and then excises the time above r1; arm two
    reflects below r1 directly.  Degenerate (deterministic) marginals fall
    back to exact equality.
    """
    if not (x <= r1 < r2):
        raise ValueError("need x <= r1 < r2")
    arm1 = _reflected_marginals(p, x, r2, r1, times, n, seed, arm=0)
    arm2 = _reflected_marginals(p, x, r1, None, times, n, seed, arm=1)
    details = []
    p_min = 1.0
    for j, tt in enumerate(times):
        a, b = arm1[j], arm2[j]
        if np.ptp(a) == 0.0 and np.ptp(b) == 0.0:
            equal = abs(a[0] - b[0]) <= 1e-12
            pv, stat = (1.0, 0.0) if equal else (0.0, abs(a[0] - b[0]))
        else:
            res = stats.ks_2samp(a, b)
            pv, stat = float(res.pvalue), float(res.statistic)
        details.append(TestReport(f"consistency.t={tt}", "ks", stat, pv, n,
                                  pv > p_threshold, seed))
        p_min = min(p_min, pv)
    curves = []
    for j, tt in enumerate(times):
        curves.append((f"timechanged@t={tt}", tuple(float(v) for v in arm1[j])))
        curves.append((f"direct@t={tt}", tuple(float(v) for v in arm2[j])))
    return TestReport(
        name="consistency", statistic="min_p", value=float(len(times)),
        p_value=p_min, n=n, passed=p_min > p_threshold, seed=seed,
        details=tuple(details), curves=tuple(curves),
    )


# -- sojourn ------------------------------------------------------------------


def path_measure(tree: ChronoTree, p: PointRef) -> float:
    """mu([rho, p]): speed-weighted length of the ancestral path to p."""
    from .chrono import normalize_point

    q = normalize_point(tree, p)
    total = 0.0
    for k, top in _ancestor_chain(tree, q):
        ind = tree.individuals[k]
        total += ind.speed * (top - ind.birth)
    return total


def sojourn_check(
    tree: ChronoTree, a: float, n_random: int = 1000, seed: int = 0
) -> float:
    """max |mu([rho, p]) - a d(rho, p)| over endpoints and random points."""
    if a < 0:
        raise ValueError("sojourn must be nonnegative")
    tree.require_valid()
    points = []
    for ind in tree.individuals.values():
        points.append(PointRef(ind.id, ind.birth))
        points.append(PointRef(ind.id, ind.death))
    rng = rng_from(seed, 17)
    m = tree.total_measure
    for _ in range(n_random):
        points.append(explore(tree, m * rng.random()))
    worst = 0.0
    for p in points:
        q = p
        dev = abs(path_measure(tree, q) - a * _depth(tree, q))
        worst = max(worst, dev)
    return worst


def _depth(tree: ChronoTree, p: PointRef) -> float:
    from .chrono import normalize_point

    return normalize_point(tree, p).height


# -- binarity / class cardinality ---------------------------------------------


@dataclass(frozen=True)
class ClassCheckReport:
    passed: bool
    binary_ok: bool
    max_class_size: int
    violations: tuple = ()


def binary_and_class_check(
    tree: Optional[ChronoTree] = None, contour: Optional[PLJContour] = None
) -> ClassCheckReport:
    """Binarity on the tree side; class cardinality <= 3 on the contour side.

    Tree: every attachment height of every parent hosts exactly one child.
    Contour: for each running-minimum level, the equivalence-class members
    among breakpoints (jump bottoms touching the level from the right plus
    the attained return) number at most 3.
    """
    violations = []
    binary_ok = True
    max_class = 1
    if tree is not None:
        for k in tree.individuals:
            births = [tree.individuals[c].birth for c in tree.children(k)]
            seen = {}
            for b in births:
                seen[b] = seen.get(b, 0) + 1
            for b, cnt in seen.items():
                if cnt > 1:
                    binary_ok = False
                    violations.append(f"individual {k}: {cnt} children at height {b!r}")
                max_class = max(max_class, cnt + 1)
    if contour is not None:
        # stack scan: consecutive equal-bottom jumps while the path stays at
        # or above the level form one class together with the final return
        stack: List[Tuple[float, dict]] = []
        for p in contour.prims:
            if isinstance(p, Jump):
                if stack:
                    kids = stack[-1][1]
                    kids[p.bottom] = kids.get(p.bottom, 0) + 1
                    max_class = max(max_class, kids[p.bottom] + 1)
                    if kids[p.bottom] + 1 > 3:
                        violations.append(
                            f"class at level {p.bottom!r} has {kids[p.bottom] + 1} members"
                        )
                stack.append((p.bottom, {}))
            else:
                while stack and stack[-1][0] >= p.bottom:
                    stack.pop()
    passed = binary_ok and max_class <= 3 and not violations
    return ClassCheckReport(passed=passed, binary_ok=binary_ok,
                            max_class_size=max_class, violations=tuple(violations))


# -- consistent families -------------------------------------------------------


def consistent_family(tree: ChronoTree, levels: Sequence[float]) -> List[PLJContour]:
    """Contours of the truncations at ascending levels, verified consistent.

    The returned family satisfies f_n = time_change(f_{n+1}, r_n) exactly;
    it is the finite representation of the direct-limit tree.
    """
    levels = list(levels)
    if any(not b > a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly ascending")
    if any(not lv > 0 for lv in levels):
        raise ValueError("levels must be positive")
    family = [encode(truncate(tree, r)) for r in levels]
    for f_lo, f_hi, r_lo in zip(family, family[1:], levels):
        if time_change(f_hi, r_lo) != f_lo:
            raise ValueError("family is not consistent under time change")
    return family
