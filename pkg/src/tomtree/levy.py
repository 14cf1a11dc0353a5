"""Spectrally positive Levy processes: exponent arithmetic and path sampling.

The exact regime is the finite-variation normal form

    X_t = x - drift * t + compound Poisson(jump_rate, jump_law),

optionally killed at rate kappa, whose Laplace exponent is

    Psi(lam) = -kappa + drift * lam + beta * lam^2 - jump_rate * (1 - L(lam)),

with L the Laplace transform of the jump law.  This is exactly the regime in
which contours of splitting trees live; beta > 0 is supported only through an
Euler scheme and is excluded from the exact identities.

Paths are piecewise linear between breakpoints with positive jumps stored as
duplicated times, so reflection below a level, killing at zero and the
above-level time change are all event-level operations.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .chrono import ChronoTree, EPS, Individual
from .contour import Excursion, Fall, Jump, PLJContour, canonicalize, time_change

__all__ = [
    "LevyParams",
    "SampledPath",
    "SimulationError",
    "psi_eval",
    "psi_prime0",
    "sojourn_of",
    "largest_root",
    "phi_inverse",
    "conjugate",
    "sample_path",
    "reflect_below",
    "kill_at_zero",
    "excise_above",
    "sample_passage_contour",
    "simulate_Qxr",
    "simulate_qxr_contour",
    "synthesize",
    "simulate_splitting_tree",
    "path_sup_distance",
    "paths_equal",
    "rng_from",
]

MAX_COPIES = 10_000_000


class SimulationError(RuntimeError):
    pass


def rng_from(seed: int, *indices: int) -> np.random.Generator:
    """Independent stream fully determined by (seed, replicate indices)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, indices)]))


@dataclass(frozen=True)
class LevyParams:
    """Parameters of a spectrally positive Laplace exponent.

    ``drift`` is the coefficient of the -t term of the finite-variation
    normal form (positive drift pushes the path down).
    """

    drift: float
    jump_rate: float = 0.0
    jump_law: object = None
    kappa: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kappa < 0 or self.beta < 0 or self.jump_rate < 0:
            raise ValueError("kappa, beta and jump_rate must be nonnegative")
        if self.jump_rate > 0 and self.jump_law is None:
            raise ValueError("jump_rate > 0 needs a jump law")
        if not (self.drift > 0 or self.beta > 0):
            raise ValueError("subordinator: need drift > 0 or beta > 0")

    @property
    def exact(self) -> bool:
        return self.beta == 0.0


def _laplace(law, lam: float) -> float:
    """Laplace transform of the jump law, numeric fallback at tol 1e-10."""
    if hasattr(law, "laplace"):
        return law.laplace(lam)
    if hasattr(law, "pdf"):
        from scipy.integrate import quad

        val, _ = quad(lambda x: math.exp(-lam * x) * law.pdf(x), 0, np.inf,
                      epsabs=1e-10, epsrel=1e-10)
        return val
    raise ValueError("jump law exposes neither laplace nor pdf")


def psi_eval(p: LevyParams, lam: float) -> float:
    """Psi(lam) = -kappa + drift lam + beta lam^2 - jump_rate (1 - L(lam))."""
    if lam < 0:
        raise ValueError("Psi is defined on lam >= 0")
    out = -p.kappa + p.drift * lam + p.beta * lam * lam
    if p.jump_rate > 0:
        out -= p.jump_rate * (1.0 - _laplace(p.jump_law, lam))
    return out


def psi_prime0(p: LevyParams) -> float:
    """Psi'(0) = drift - jump_rate * E[J]; the criticality indicator."""
    out = p.drift
    if p.jump_rate > 0:
        out -= p.jump_rate * p.jump_law.mean()
    return out


def sojourn_of(p: LevyParams) -> float:
    """Constant sojourn a = lim lam / Psi(lam): 1/drift, or 0 with a Brownian part."""
    if p.beta > 0:
        return 0.0
    return 1.0 / p.drift


def is_supercritical(p: LevyParams) -> bool:
    return p.kappa > 0 or psi_prime0(p) < 0


def _rightmost_solution(p: LevyParams, target: float, tol: float = 1e-12) -> float:
    """Largest lam >= 0 with Psi(lam) = target (Psi convex, Psi(inf) = inf)."""
    lo = 0.0
    f_lo = psi_eval(p, lo) - target
    if f_lo >= 0.0:
        if target == 0.0 and p.kappa == 0.0 and psi_prime0(p) >= 0.0:
            return 0.0
        # Psi(0) = -kappa <= target fails only for target < -kappa
        if f_lo > 0.0:
            raise ValueError("no root bracket: Psi(0) already above target")
        # Psi(0) == target and Psi' (0) < 0: move just right of the root at 0
        lo = 1e-12
        while psi_eval(p, lo) - target >= 0.0:
            lo *= 2.0
            if lo > 1.0:
                return 0.0
    hi = max(2.0 * lo, 1.0)
    while psi_eval(p, hi) - target <= 0.0:
        hi *= 2.0
        if hi > 1e16:
            raise ValueError("no upper bracket for the root search")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if psi_eval(p, mid) - target <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def largest_root(p: LevyParams) -> float:
    """Largest root b of Psi; b > 0 iff supercritical, else 0."""
    if p.kappa == 0.0 and psi_prime0(p) >= 0.0:
        return 0.0
    return _rightmost_solution(p, 0.0)


def phi_inverse(p: LevyParams, q: float) -> float:
    """Phi(q): the rightmost solution of Psi(lam) = q, for q >= 0."""
    if q < 0:
        raise ValueError("Phi is defined on q >= 0")
    if q == 0.0:
        return largest_root(p)
    return _rightmost_solution(p, q)


def conjugate(p: LevyParams) -> LevyParams:
    """Parameters of Psi#(lam) = Psi(lam + b) for a supercritical exponent.

    The jump law is exponentially tilted by b; the killing is absorbed
    (Psi#(0) = Psi(b) = 0) and a Brownian part shifts the drift by 2*beta*b.
    """
    b = largest_root(p)
    if not b > 0:
        raise ValueError("conjugate requires a supercritical exponent (b > 0)")
    if p.jump_rate > 0:
        tilted, mass = p.jump_law.tilt(b)
        rate = p.jump_rate * mass
    else:
        tilted, rate = None, 0.0
    return LevyParams(
        drift=p.drift + 2.0 * p.beta * b,
        jump_rate=rate,
        jump_law=tilted,
        kappa=0.0,
        beta=p.beta,
    )


# -- sampled paths ---------------------------------------------------------


@dataclass
class SampledPath:
    """Piecewise-linear cadlag path given by breakpoints.

    ``times`` is nondecreasing; a repeated time encodes a jump (left value
    then right value).  ``killed_at`` marks a jump to the cemetery: the path
    is undefined strictly after that time.
    """

    times: List[float]
    values: List[float]
    kind: str = "exact"
    step: Optional[float] = None
    killed_at: Optional[float] = None
    copies: int = 1

    @property
    def horizon(self) -> float:
        return self.times[-1] if self.times else 0.0

    @property
    def start(self) -> float:
        return self.values[0] if self.values else 0.0

    @property
    def final(self) -> float:
        return self.values[-1] if self.values else 0.0

    def value(self, t: float) -> float:
        """Cadlag evaluation; raises beyond the kill time / horizon."""
        if t < 0 or t > self.horizon + EPS:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        if self.killed_at is not None and t > self.killed_at:
            raise ValueError(f"path killed at {self.killed_at}")
        ts = self.times
        # rightmost breakpoint with time <= t
        i = bisect.bisect_right(ts, t) - 1
        if i < 0:
            return self.values[0]
        if i == len(ts) - 1:
            return self.values[-1]
        t0, v0 = ts[i], self.values[i]
        t1, v1 = ts[i + 1], self.values[i + 1]
        if t1 == t0:
            return v1
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)

    def alive_at(self, t: float) -> bool:
        if t > self.horizon + EPS:
            return False
        return self.killed_at is None or t <= self.killed_at

    def breakpoints(self):
        return list(zip(self.times, self.values))

    @classmethod
    def from_contour(cls, c: PLJContour, copies: int = 1) -> "SampledPath":
        times = [0.0]
        values = [0.0] if not c.prims else [c.prims[0].bottom]
        t = 0.0
        for p in c.prims:
            if isinstance(p, Jump):
                if values[-1] != p.bottom or times[-1] != t:
                    times.append(t)
                    values.append(p.bottom)
                times.append(t)
                values.append(p.top)
            else:
                t += (p.top - p.bottom) / p.rate
                times.append(t)
                values.append(p.bottom)
        return cls(times=times, values=values, kind="exact", copies=copies)


def _append_point(times, values, t, v):
    if times and times[-1] == t and values[-1] == v:
        return
    times.append(t)
    values.append(v)


def sample_path(
    p: LevyParams,
    x: float,
    horizon: float,
    rng: np.random.Generator,
    step: Optional[float] = None,
) -> SampledPath:
    """Sample X on [0, horizon] started at x.

    Exact event-driven simulation when beta = 0; Euler-Maruyama with the
    given step when beta > 0 (flagged approximate).  Killing sends the path
    to the cemetery at an independent Exp(kappa) time.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    kill = rng.exponential(1.0 / p.kappa) if p.kappa > 0 else math.inf
    end = min(horizon, kill)
    if p.beta > 0:
        if step is None:
            raise ValueError("beta > 0 requires an Euler step")
        return _sample_euler(p, x, horizon, end, kill, rng, step)
    times = [0.0]
    values = [x]
    t, v = 0.0, x
    while True:
        wait = rng.exponential(1.0 / p.jump_rate) if p.jump_rate > 0 else math.inf
        if t + wait >= end:
            _append_point(times, values, end, v - p.drift * (end - t))
            break
        t += wait
        v_pre = v - p.drift * wait
        jump = float(p.jump_law.sample(rng))
        _append_point(times, values, t, v_pre)
        times.append(t)
        values.append(v_pre + jump)
        v = v_pre + jump
    killed_at = end if kill <= horizon else None
    return SampledPath(times=times, values=values, kind="exact", killed_at=killed_at)


def _sample_euler(p, x, horizon, end, kill, rng, step):
    n = max(1, int(math.ceil(end / step)))
    dt = end / n
    times = [0.0]
    values = [x]
    v = x
    sigma = math.sqrt(2.0 * p.beta * dt)
    for k in range(n):
        dv = -p.drift * dt + sigma * rng.standard_normal()
        if p.jump_rate > 0:
            nj = rng.poisson(p.jump_rate * dt)
            for _ in range(nj):
                dv += float(p.jump_law.sample(rng))
        v += dv
        times.append((k + 1) * dt)
        values.append(v)
    killed_at = end if kill <= horizon else None
    return SampledPath(times=times, values=values, kind="euler", step=step,
                       killed_at=killed_at)


# -- path operations -------------------------------------------------------


def reflect_below(path: SampledPath, r: float) -> SampledPath:
    """X - (max X - r)^+ : the path reflected below the barrier r."""
    if math.isinf(r):
        return path
    if path.start > r:
        raise ValueError("reflection requires start <= r")
    times: List[float] = []
    values: List[float] = []
    m = path.start
    prev_t, prev_v = None, None
    for t, v in zip(path.times, path.values):
        if prev_t is not None and t > prev_t and v > prev_v:
            # rising segment: the reflected path pins at r once the running
            # max passes max(m, r); insert the crossing breakpoint
            cap = max(m, r)
            if prev_v < cap < v:
                tc = prev_t + (t - prev_t) * (cap - prev_v) / (v - prev_v)
                _append_point(times, values, tc, cap - max(m - r, 0.0))
            m = max(m, v)
        elif prev_t is None or t == prev_t:
            m = max(m, v)
        _append_point(times, values, t, v - max(m - r, 0.0))
        prev_t, prev_v = t, v
    return SampledPath(times=times, values=values, kind=path.kind, step=path.step,
                       killed_at=path.killed_at, copies=path.copies)


def kill_at_zero(path: SampledPath) -> SampledPath:
    """Stop the path at its first hitting time of 0 (exact within segments).

    The cadlag value at time 0 is the one after any initial jump; a path
    whose left limit starts at 0 (contour convention) is not killed there.
    """
    start_idx = 0
    while (start_idx + 1 < len(path.times)
           and path.times[start_idx + 1] == path.times[0]):
        start_idx += 1
    if path.values[start_idx] <= 0.0:
        return SampledPath(times=[0.0], values=[path.values[start_idx]],
                           kind=path.kind, step=path.step, killed_at=0.0,
                           copies=path.copies)
    times: List[float] = list(path.times[: start_idx + 1])
    values: List[float] = list(path.values[: start_idx + 1])
    prev_t, prev_v = times[-1], values[-1]
    for t, v in list(zip(path.times, path.values))[start_idx + 1:]:
        if v <= 0.0 and t > prev_t and prev_v > 0.0:
            tc = prev_t + (t - prev_t) * prev_v / (prev_v - v)
            _append_point(times, values, tc, 0.0)
            return SampledPath(times=times, values=values, kind=path.kind,
                               step=path.step, killed_at=tc, copies=path.copies)
        if v <= 0.0 and t == prev_t:
            _append_point(times, values, t, v)
            return SampledPath(times=times, values=values, kind=path.kind,
                               step=path.step, killed_at=t, copies=path.copies)
        _append_point(times, values, t, v)
        prev_t, prev_v = t, v
    return SampledPath(times=times, values=values, kind=path.kind, step=path.step,
                       killed_at=path.killed_at, copies=path.copies)


def excise_above(path: SampledPath, r: float) -> SampledPath:
    """The time change X o C^r: Lebesgue time above r is excised.

    Down-crossings re-enter at exactly r; an up-jump over r turns into a jump
    landing at r once the path returns (or the path ends there if it never
    does within the horizon).
    """
    if math.isinf(r):
        return path
    times: List[float] = []
    values: List[float] = []
    elapsed = 0.0  # accumulated kept time
    above = path.start > r
    pending_from = None
    if not above:
        _append_point(times, values, 0.0, path.start)
    prev_t, prev_v = path.times[0], path.values[0]
    for t, v in list(zip(path.times, path.values))[1:]:
        if t == prev_t:  # jump
            if not above:
                if v > r:
                    above = True
                    pending_from = prev_v
                else:
                    _append_point(times, values, elapsed, prev_v)
                    _append_point(times, values, elapsed, v)
            prev_t, prev_v = t, v
            continue
        dt = t - prev_t
        if above:
            if v < r:  # crosses back down at exactly r
                tc = prev_t + dt * (prev_v - r) / (prev_v - v)
                if pending_from is not None:
                    _append_point(times, values, elapsed, pending_from)
                    pending_from = None
                _append_point(times, values, elapsed, r)
                above = False
                kept = t - tc
                elapsed += kept
                _append_point(times, values, elapsed, v)
            # still above: drop the whole segment
        else:
            if v > r:  # crosses up at exactly r (continuous exit)
                tc = prev_t + dt * (r - prev_v) / (v - prev_v)
                elapsed += tc - prev_t
                _append_point(times, values, elapsed, r)
                above = True
                pending_from = None
            else:
                elapsed += dt
                _append_point(times, values, elapsed, v)
        prev_t, prev_v = t, v
    killed_at = None
    if path.killed_at is not None:
        killed_at = elapsed
    return SampledPath(times=times, values=values, kind=path.kind, step=path.step,
                       killed_at=killed_at, copies=path.copies)


def path_sup_distance(p1: SampledPath, p2: SampledPath) -> float:
    """max over union breakpoints of |p1 - p2| plus the horizon mismatch.

    Jitter-sensitive at jump times; prefer :func:`paths_equal` for identity
    checks between independently computed paths.
    """
    ts = sorted(set(p1.times) | set(p2.times))
    h = min(p1.horizon, p2.horizon)
    sup = 0.0
    for t in ts:
        if t > h:
            break
        sup = max(sup, abs(p1.value(t) - p2.value(t)))
    return sup + abs(p1.horizon - p2.horizon)


def _canonical_breakpoints(path: SampledPath, slope_tol: float = 1e-6):
    """Breakpoints with collinear interior points removed."""
    pts = [(t, v) for t, v in zip(path.times, path.values)]
    out = [pts[0]]
    for k in range(1, len(pts) - 1):
        t0, v0 = out[-1]
        t1, v1 = pts[k]
        t2, v2 = pts[k + 1]
        if t1 == t0 or t2 == t1:
            out.append(pts[k])
            continue
        s01 = (v1 - v0) / (t1 - t0)
        s12 = (v2 - v1) / (t2 - t1)
        if abs(s01 - s12) > slope_tol:
            out.append(pts[k])
    if len(pts) > 1:
        out.append(pts[-1])
    return out


def paths_equal(p1: SampledPath, p2: SampledPath, tol: float = 1e-9) -> bool:
    """Breakpoint-sequence equality within tol on both coordinates.

    The right notion of path identity for independently recomputed paths:
    a 1-ulp shift of a jump time stays a 1-ulp discrepancy instead of a
    jump-sized one.
    """
    a = _canonical_breakpoints(p1)
    b = _canonical_breakpoints(p2)
    if len(a) != len(b):
        return False
    return all(
        abs(ta - tb) <= tol and abs(va - vb) <= tol
        for (ta, va), (tb, vb) in zip(a, b)
    )


# -- reflected-and-killed processes ---------------------------------------


def sample_passage_contour(
    p: LevyParams, x: float, rng: np.random.Generator,
    max_events: int = 2_000_000,
) -> PLJContour:
    """Raw path from x run to its first passage at 0, as an exact contour.

    Requires kappa = 0, beta = 0 and a (sub)critical exponent so the passage
    time is almost surely finite.
    """
    if not p.exact or p.kappa > 0:
        raise ValueError("exact passage sampling needs beta = 0, kappa = 0")
    if psi_prime0(p) < 0:
        raise ValueError("supercritical exponent: passage to 0 is not a.s. finite")
    if not x > 0:
        raise ValueError("start must be positive")
    prims = [Jump(0.0, x)]
    v = x
    for _ in range(max_events):
        wait = rng.exponential(1.0 / p.jump_rate) if p.jump_rate > 0 else math.inf
        passage = v / p.drift
        if passage <= wait:
            prims.append(Fall(v, 0.0, p.drift))
            return canonicalize(prims)
        v_pre = v - p.drift * wait
        jump = float(p.jump_law.sample(rng))
        prims.append(Fall(v, v_pre, p.drift))
        prims.append(Jump(v_pre, v_pre + jump))
        v = v_pre + jump
    raise SimulationError("passage simulation exceeded the event budget")


def simulate_qxr_contour(
    p: LevyParams, x: float, r: float, rng: np.random.Generator,
    max_copies: int = MAX_COPIES,
) -> Tuple[PLJContour, int]:
    """The reflected-below-r, killed-at-zero process Q_x^r as an exact contour.

    (Sub)critical without killing: one copy run to its passage time, then the
    above-r time change (the construction by concatenated time-changed
    copies).  Otherwise the copies are concatenated at the barrier: an
    up-jump over r is clipped to land at r, and the copy is replaced there
    with probability 1 - exp(-Phi(kappa) * overshoot), the chance it never
    returns alive; by the strong Markov property the law is unchanged.
    """
    if not p.exact:
        raise ValueError("Q_x^r sampling is exact-only (beta = 0)")
    if not 0 < x <= r:
        raise ValueError("need 0 < x <= r")
    if p.kappa == 0.0 and psi_prime0(p) >= 0:
        raw = sample_passage_contour(p, x, rng)
        return (time_change(raw, r) if not math.isinf(r) else raw), 1
    if math.isinf(r):
        raise ValueError("supercritical or killed process needs a finite barrier")
    phi_k = phi_inverse(p, p.kappa)
    prims: List = [Jump(0.0, x)]
    v = x
    copies = 1
    kill_left = rng.exponential(1.0 / p.kappa) if p.kappa > 0 else math.inf
    while True:
        wait = rng.exponential(1.0 / p.jump_rate) if p.jump_rate > 0 else math.inf
        passage = v / p.drift
        if passage <= wait and passage <= kill_left:
            prims.append(Fall(v, 0.0, p.drift))
            return canonicalize(prims), copies
        if kill_left < wait:
            v_pre = v - p.drift * kill_left
            if v_pre < v:
                prims.append(Fall(v, v_pre, p.drift))
            copies += 1
            if copies > max_copies:
                raise SimulationError("copy budget exhausted; parameters mis-specified?")
            if v_pre < r:
                prims.append(Jump(v_pre, r))
            v = r
            kill_left = rng.exponential(1.0 / p.kappa) if p.kappa > 0 else math.inf
            continue
        kill_left -= wait
        v_pre = v - p.drift * wait
        jump = float(p.jump_law.sample(rng))
        if v_pre < v:
            prims.append(Fall(v, v_pre, p.drift))
        if v_pre + jump <= r:
            prims.append(Jump(v_pre, v_pre + jump))
            v = v_pre + jump
        else:
            overshoot = v_pre + jump - r
            if v_pre < r:
                prims.append(Jump(v_pre, r))
            v = r
            # fresh kill clock either way: Exp is memoryless given survival
            if rng.random() < 1.0 - math.exp(-phi_k * overshoot):
                copies += 1
                if copies > max_copies:
                    raise SimulationError("copy budget exhausted")
            kill_left = rng.exponential(1.0 / p.kappa) if p.kappa > 0 else math.inf


def simulate_Qxr(
    p: LevyParams, x: float, r: float, rng: np.random.Generator,
) -> SampledPath:
    """Q_x^r as a sampled path (contour-shaped: ends at exactly 0)."""
    c, copies = simulate_qxr_contour(p, x, r, rng)
    return SampledPath.from_contour(c, copies=copies)


# -- Ito synthesis ----------------------------------------------------------


def synthesize(
    excursions: Sequence[Tuple[float, Excursion]],
    drift_a: float,
    horizon: float,
) -> SampledPath:
    """Deterministic reassembly of a path from its excursions above the minimum.

    ``excursions`` holds (depth, excursion) pairs with strictly increasing
    depths measured below the path's starting level.  With S_l = a*l +
    sum_{depth_i <= l} length_i and Lambda its inverse, the result is

        Y_t = sum_i 1{S_{depth_i-} <= t < S_{depth_i}} path_i(t - S_{depth_i-})
              - Lambda_t

    on [0, horizon]: the increment process of the suffix being reconstructed.
    """
    if drift_a < 0:
        raise ValueError("drift_a must be nonnegative")
    if not horizon >= 0:
        raise ValueError("horizon must be nonnegative")
    depths = [d for d, _ in excursions]
    for a, b in zip(depths, depths[1:]):
        if not b > a:
            raise ValueError("overlapping placements: depths must strictly increase")
    if any(d < 0 for d in depths):
        raise ValueError("negative depth")
    times = [0.0]
    values = [0.0]
    t = 0.0
    depth = 0.0
    for d, exc in excursions:
        path = exc.path if isinstance(exc, Excursion) else exc
        stair = d - depth
        if stair > 0:
            if drift_a == 0:
                raise ValueError("drift_a = 0 cannot bridge distinct depths")
            t += drift_a * stair
            _append_point(times, values, t, -d)
        depth = d
        for p in path.prims:
            if isinstance(p, Jump):
                _append_point(times, values, t, p.bottom - d)
                times.append(t)
                values.append(p.top - d)
            else:
                t += (p.top - p.bottom) / p.rate
                _append_point(times, values, t, p.bottom - d)
        if t > horizon + EPS:
            break
    if t < horizon:
        if drift_a == 0:
            raise ValueError("drift_a = 0 cannot extend beyond the last excursion")
        depth += (horizon - t) / drift_a
        t = horizon
        _append_point(times, values, t, -depth)
    elif t > horizon + EPS:
        # an excursion straddles the horizon: cut the path there
        out = SampledPath(times=times, values=values, kind="exact")
        cut_v = out.value(horizon)
        k = bisect.bisect_right(times, horizon)
        times, values = times[:k], values[:k]
        _append_point(times, values, horizon, cut_v)
    return SampledPath(times=times, values=values, kind="exact")


# -- splitting trees ---------------------------------------------------------


def simulate_splitting_tree(
    birth_rate: float,
    lifetime_law,
    root_lifetime,
    r_trunc: float,
    rng: np.random.Generator,
    max_individuals: int = 100_000,
) -> ChronoTree:
    """Splitting tree of the binary homogeneous branching model.

    Individuals live segments with i.i.d. law ``lifetime_law`` and give birth
    on the part of their segment below ``r_trunc`` at Poisson rate
    ``birth_rate``.  Birth heights within EPS of a forbidden tie are
    resampled.  A supercritical model requires a finite truncation level.
    """
    if birth_rate < 0:
        raise ValueError("birth_rate must be nonnegative")
    if math.isinf(r_trunc) and birth_rate > 0:
        if birth_rate * lifetime_law.mean() > 1.0 + 1e-12:
            raise ValueError("supercritical without truncation: tree is infinite")
    if not (math.isinf(r_trunc) or r_trunc > 0):
        raise ValueError("truncation level must be positive")

    def draw_lifetime(law_or_value):
        if hasattr(law_or_value, "sample"):
            return float(law_or_value.sample(rng))
        return float(law_or_value)

    root_len = draw_lifetime(root_lifetime)
    if not root_len > 0:
        raise ValueError("root lifetime must be positive")
    inds = []
    next_id = 0

    def clip(h):
        return h if h <= r_trunc else r_trunc

    root = Individual(0, None, 0.0, clip(root_len), 1.0)
    inds.append(root)
    next_id = 1
    queue = [root]
    while queue:
        parent = queue.pop()
        if birth_rate == 0:
            continue
        length = parent.death - parent.birth
        n = rng.poisson(birth_rate * length)
        if n == 0:
            continue
        births = []
        forbidden = [parent.birth, parent.death]
        for _ in range(n):
            for _attempt in range(64):
                b = parent.birth + length * rng.random()
                if all(abs(b - f) > EPS for f in forbidden):
                    births.append(b)
                    forbidden.append(b)
                    break
            else:
                raise SimulationError("could not separate birth heights")
        for b in births:
            death = clip(b + draw_lifetime(lifetime_law))
            # degenerate clip: birth within EPS of the level was excluded by
            # the forbidden list only when parent.death == r_trunc; guard anyway
            if death - b <= EPS:
                continue
            child = Individual(next_id, parent.id, b, death, 1.0)
            next_id += 1
            inds.append(child)
            queue.append(child)
            if len(inds) > max_individuals:
                raise SimulationError("individual budget exhausted")
    return ChronoTree(inds)
