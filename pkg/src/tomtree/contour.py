"""Exact piecewise-linear-with-jumps contour functions and the tree codec.

A contour is stored as a contiguous chain of primitives carrying *absolute
heights*: ``Jump(bottom, top)`` and ``Fall(top, bottom, rate)``.  Encoding a
tree copies birth/death heights bit-for-bit into the primitives and decoding
copies them back, so the round trips and the truncation/time-change
commutation are exact float identities, not approximations.  Times are
derived quantities (a fall of height h at rate v lasts h / v).

The decoding rule is the LIFO one: each jump is an individual whose lifetime
is the jump size, and the bottom of the jump attaches to the segment being
descended at that moment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Union

from .chrono import EPS, ChronoTree, Individual

__all__ = [
    "Jump",
    "Fall",
    "PLJContour",
    "Excursion",
    "InvalidContourError",
    "canonicalize",
    "contour_from_sizes",
    "encode",
    "decode",
    "time_change",
    "excursions_above_min",
    "upcrossings",
    "contour_distance",
]


class InvalidContourError(ValueError):
    pass


class Jump(NamedTuple):
    bottom: float
    top: float


class Fall(NamedTuple):
    top: float
    bottom: float
    rate: float


Primitive = Union[Jump, Fall]


def _prim_start(p: Primitive) -> float:
    return p.bottom if isinstance(p, Jump) else p.top


def _prim_end(p: Primitive) -> float:
    return p.top if isinstance(p, Jump) else p.bottom


def _prim_duration(p: Primitive) -> float:
    if isinstance(p, Jump):
        return 0.0
    return (p.top - p.bottom) / p.rate


class PLJContour:
    """Canonical cadlag contour: alternating-capable jumps and falls.

    The function starts at 0-, applies the first primitive at time 0 and ends
    at height exactly 0.  Instances are treated as immutable; equality is
    exact equality of the primitive chain.
    """

    __slots__ = ("prims", "_starts")

    def __init__(self, prims: Sequence[Primitive]):
        self.prims = tuple(prims)
        starts = []
        t = 0.0
        for p in self.prims:
            starts.append(t)
            t += _prim_duration(p)
        self._starts = tuple(starts)

    # -- queries -----------------------------------------------------------

    @property
    def duration(self) -> float:
        if not self.prims:
            return 0.0
        return self._starts[-1] + _prim_duration(self.prims[-1])

    @property
    def max_height(self) -> float:
        return max(p.top for p in self.prims) if self.prims else 0.0

    @property
    def jump_count(self) -> int:
        return sum(1 for p in self.prims if isinstance(p, Jump))

    def __eq__(self, other):
        return isinstance(other, PLJContour) and self.prims == other.prims

    def __hash__(self):
        return hash(self.prims)

    def __repr__(self):
        bits = []
        for p in self.prims:
            if isinstance(p, Jump):
                bits.append(f"J{p.top - p.bottom:g}")
            else:
                bits.append(f"F({(p.top - p.bottom) / p.rate:g},{p.rate:g})")
        return "<PLJContour " + " ".join(bits) + ">"

    def eval(self, t: float) -> float:
        """Cadlag evaluation f(t), 0 <= t <= duration."""
        m = self.duration
        if t < 0 or t > m:
            if -EPS <= t < 0:
                t = 0.0
            elif m < t <= m + EPS:
                t = m
            else:
                raise InvalidContourError(f"time {t} outside [0, {m}]")
        value = 0.0
        for p, start in zip(self.prims, self._starts):
            if isinstance(p, Jump):
                if t < start:
                    return value
                value = p.top
            else:
                dur = _prim_duration(p)
                if t < start + dur:
                    return p.top - (t - start) * p.rate
                value = p.bottom
        return value

    def min_between(self, t1: float, t2: float) -> float:
        """inf of f over [t1, t2] (t1 <= t2)."""
        if t2 < t1:
            raise ValueError("need t1 <= t2")
        lo = min(self.eval(t1), self.eval(t2))
        for p, start in zip(self.prims, self._starts):
            if isinstance(p, Jump):
                continue
            dur = _prim_duration(p)
            if start + dur <= t1 or start >= t2:
                continue
            end = min(start + dur, t2)
            lo = min(lo, p.top - (end - start) * p.rate)
        return lo

    def breakpoints(self):
        """(time, left value, right value) at every primitive boundary."""
        pts = [(0.0, 0.0, _prim_start(self.prims[0]) if self.prims else 0.0)]
        t = 0.0
        v = 0.0
        for p in self.prims:
            if isinstance(p, Jump):
                pts.append((t, p.bottom, p.top))
                v = p.top
            else:
                t += _prim_duration(p)
                v = p.bottom
                pts.append((t, v, v))
        return pts


def canonicalize(prims: Sequence[Primitive]) -> PLJContour:
    """Merge mergeable primitives, drop empty ones, and validate.

    Raises :class:`InvalidContourError` if the chain is not contiguous, dips
    below 0, or fails to terminate at exactly 0.
    """
    out: List[Primitive] = []
    for p in prims:
        if isinstance(p, Jump):
            if p.top < p.bottom:
                raise InvalidContourError("negative jump")
            if p.top == p.bottom:
                continue
        else:
            if p.top < p.bottom:
                raise InvalidContourError("rising fall")
            if not p.rate > 0:
                raise InvalidContourError("non-positive fall rate")
            if p.top == p.bottom:
                continue
        if out:
            if _prim_end(out[-1]) != _prim_start(p):
                raise InvalidContourError(
                    f"non-contiguous primitives at height {_prim_end(out[-1])!r} vs {_prim_start(p)!r}"
                )
            last = out[-1]
            if isinstance(last, Jump) and isinstance(p, Jump):
                out[-1] = Jump(last.bottom, p.top)
                continue
            if isinstance(last, Fall) and isinstance(p, Fall) and last.rate == p.rate:
                out[-1] = Fall(last.top, p.bottom, last.rate)
                continue
        out.append(p)
    if not out:
        return PLJContour(())
    if not isinstance(out[0], Jump):
        raise InvalidContourError("contour must start with a jump")
    if out[0].bottom != 0.0:
        raise InvalidContourError("contour must start from height 0")
    for p in out:
        if p.bottom < 0:
            if p.bottom < -EPS:
                raise InvalidContourError(f"height dips below 0 ({p.bottom})")
            raise InvalidContourError("height within tolerance below 0")
    if _prim_end(out[-1]) != 0.0:
        if abs(_prim_end(out[-1])) > EPS:
            raise InvalidContourError(
                f"terminal height {_prim_end(out[-1])!r} is not 0"
            )
        raise InvalidContourError("terminal height within tolerance of 0 but not exact")
    return PLJContour(out)


def contour_from_sizes(items) -> PLJContour:
    """Build a contour from ('J', size) / ('F', duration, rate) items.

    Heights are accumulated; a terminal height within EPS of 0 is snapped to
    exactly 0 (text formats carry sizes, not absolute heights).
    """
    prims: List[Primitive] = []
    h = 0.0
    for it in items:
        kind = it[0].upper()
        if kind == "J":
            size = float(it[1])
            if size < 0:
                raise InvalidContourError("negative jump")
            prims.append(Jump(h, h + size))
            h = h + size
        elif kind == "F":
            duration = float(it[1])
            rate = float(it[2]) if len(it) > 2 and it[2] is not None else 1.0
            drop = duration * rate
            bottom = h - drop
            if abs(bottom) <= EPS:
                bottom = 0.0
            prims.append(Fall(h, bottom, rate))
            h = bottom
        else:
            raise InvalidContourError(f"unknown primitive kind {it[0]!r}")
    return canonicalize(prims)


def contour_sizes(c: PLJContour):
    """Inverse of :func:`contour_from_sizes`: size/duration view for text IO."""
    out = []
    for p in c.prims:
        if isinstance(p, Jump):
            out.append(("J", p.top - p.bottom, None))
        else:
            out.append(("F", (p.top - p.bottom) / p.rate, p.rate))
    return out


# -- codec ---------------------------------------------------------------


def encode(tree: ChronoTree) -> PLJContour:
    """Contour process f(t) = d(rho, phi(t)) of a chronological tree.

    Jumps are the individuals' lifetimes in LIFO order; heights are copied
    from the tree without arithmetic.
    """
    tree.require_valid()
    prims: List[Primitive] = []
    root = tree.root
    prims.append(Jump(root.birth, root.death))
    # frames: (individual, next child index, current top height)
    stack = [(root, 0, root.death)]
    while stack:
        ind, ci, top = stack.pop()
        kids = tree.children(ind.id)
        rate = 1.0 / ind.speed
        if ci < len(kids):
            child = tree.individuals[kids[ci]]
            if top != child.birth:
                prims.append(Fall(top, child.birth, rate))
            stack.append((ind, ci + 1, child.birth))
            prims.append(Jump(child.birth, child.death))
            stack.append((child, 0, child.death))
        else:
            if top != ind.birth:
                prims.append(Fall(top, ind.birth, rate))
    return canonicalize(prims)


def decode(c: PLJContour) -> ChronoTree:
    """Tree coded by a canonical contour (inverse of :func:`encode`).

    Each jump becomes an individual attached to the segment under
    exploration; ties within EPS on attachment heights are rejected as
    ambiguous rather than silently broken.
    """
    if not c.prims:
        raise InvalidContourError("empty contour")
    if canonicalize(c.prims) != c:
        raise InvalidContourError("non-canonical contour")
    inds: List[dict] = []  # builders: id/parent/birth/death/rate
    child_births: dict = {}
    stack: List[dict] = []
    root_builder = None
    zero_child_used = False
    for p in c.prims:
        if isinstance(p, Jump):
            if stack:
                parent = stack[-1]
                if abs(p.bottom - parent["birth"]) <= EPS:
                    raise InvalidContourError(
                        f"jump bottom {p.bottom!r} ties the parent's birth"
                    )
                for b in child_births[parent["id"]]:
                    if abs(p.bottom - b) <= EPS:
                        raise InvalidContourError(
                            f"jump bottom {p.bottom!r} ties an earlier attachment"
                        )
                parent_id = parent["id"]
            elif root_builder is None:
                parent_id = None
            elif p.bottom == 0.0 and not zero_child_used:
                # one child may sprout at the root point itself
                parent_id = root_builder["id"]
                zero_child_used = True
            else:
                raise InvalidContourError("second zero-height attachment")
            builder = {
                "id": len(inds),
                "parent": parent_id,
                "birth": p.bottom,
                "death": p.top,
                "rate": None,
            }
            if parent_id is not None:
                child_births[parent_id].append(p.bottom)
            child_births[builder["id"]] = []
            inds.append(builder)
            if root_builder is None:
                root_builder = builder
            stack.append(builder)
        else:
            # descend from p.top to p.bottom, popping finished segments
            h = p.top
            while stack and stack[-1]["birth"] >= p.bottom:
                cur = stack.pop()
                if h > cur["birth"]:
                    if cur["rate"] is None:
                        cur["rate"] = p.rate
                    elif cur["rate"] != p.rate:
                        raise InvalidContourError(
                            f"fall rate changes inside individual {cur['id']}"
                        )
                h = cur["birth"]
            if stack and p.bottom < h:
                cur = stack[-1]
                if cur["rate"] is None:
                    cur["rate"] = p.rate
                elif cur["rate"] != p.rate:
                    raise InvalidContourError(
                        f"fall rate changes inside individual {cur['id']}"
                    )
    if stack:
        raise InvalidContourError("contour does not return to 0")
    out = []
    for b in inds:
        rate = b["rate"] if b["rate"] is not None else 1.0
        out.append(
            Individual(b["id"], b["parent"], b["birth"], b["death"], 1.0 / rate)
        )
    tree = ChronoTree(out)
    tree.require_valid()
    return tree


def time_change(c: PLJContour, r: float) -> PLJContour:
    """Excise the strictly-above-r part of the contour (f composed with C^r).

    Jumps crossing r land exactly at r (closed truncation); heights below r
    are copied bit-for-bit, so this commutes exactly with tree truncation.
    """
    if not r > 0:
        raise ValueError("time-change level must be positive")
    if math.isinf(r):
        return c
    out: List[Primitive] = []
    for p in c.prims:
        if isinstance(p, Jump):
            if p.top <= r:
                out.append(p)
            elif p.bottom < r:
                out.append(Jump(p.bottom, r))
            # bottom >= r: entirely excised
        else:
            top_kept = p.top if p.top <= r else r
            if p.bottom < top_kept:
                out.append(Fall(top_kept, p.bottom, p.rate))
    return canonicalize(out)


def upcrossings(c: PLJContour, h: float) -> int:
    """Number of jumps whose span [bottom, top) contains h."""
    if h < 0:
        return 0
    return sum(
        1 for p in c.prims if isinstance(p, Jump) and p.bottom <= h < p.top
    )


# -- excursion decomposition ----------------------------------------------


@dataclass(frozen=True)
class Excursion:
    """One excursion of the contour above its running minimum.

    ``level`` is the running-minimum height at which the excursion sits (the
    depth d(rho, sigma) of the right subtree it codes); ``path`` is the
    height-shifted fragment, itself a valid contour of the subtree.
    """

    level: float
    path: PLJContour
    start_time: float

    @property
    def length(self) -> float:
        return self.path.duration


def _split_fall_at(p: Fall, h: float):
    """Split a fall at an interior height h (no arithmetic on heights)."""
    return Fall(p.top, h, p.rate), Fall(h, p.bottom, p.rate)


def position_of(c: PLJContour, t: float):
    """(index, time offset into that primitive) for a time t in [0, m]."""
    m = c.duration
    if t < 0 or t > m:
        if m < t <= m + EPS:
            t = m
        elif -EPS <= t < 0:
            t = 0.0
        else:
            raise InvalidContourError(f"time {t} outside [0, {m}]")
    for i, (p, start) in enumerate(zip(c.prims, c._starts)):
        dur = _prim_duration(p)
        if t < start + dur:
            return i, t - start
    return len(c.prims), 0.0


def suffix_primitives(c: PLJContour, t: float):
    """Primitives of the path restriction to [t, duration].

    The first element may be a partial fall starting at height f(t); the
    value f(t) is the single arithmetic output, everything else is spliced.
    """
    idx, offset = position_of(c, t)
    out: List[Primitive] = []
    if idx < len(c.prims) and offset > 0.0:
        # position_of only lands inside falls (jumps have zero duration)
        p = c.prims[idx]
        h = p.top - offset * p.rate
        if h > p.bottom:
            out.append(Fall(h, p.bottom, p.rate))
        idx += 1
    out.extend(c.prims[idx:])
    return out


def excursions_above_min(c: PLJContour, from_t: float) -> List[Excursion]:
    """Excursions of the contour above its running minimum on [from_t, m].

    The suffix decomposes into the strictly decreasing staircase of the
    running minimum plus these excursions; each is tagged with the level at
    which it begins, and its path decodes to the corresponding right subtree.
    """
    prims = suffix_primitives(c, from_t)
    excursions: List[Excursion] = []
    i = 0
    t = from_t
    while i < len(prims):
        p = prims[i]
        if isinstance(p, Fall):
            t += _prim_duration(p)
            i += 1
            continue
        # a jump from the running minimum opens an excursion at level p.bottom
        level = p.bottom
        start_time = t
        frag: List[Primitive] = [Jump(0.0, p.top - level)]
        i += 1
        closed = False
        while i < len(prims):
            q = prims[i]
            if isinstance(q, Jump):
                frag.append(Jump(q.bottom - level, q.top - level))
                i += 1
                continue
            if q.bottom >= level:
                frag.append(Fall(q.top - level, q.bottom - level, q.rate))
                t += _prim_duration(q)
                i += 1
                if q.bottom == level:
                    closed = True
                    break
                continue
            upper, lower = _split_fall_at(q, level)
            frag.append(Fall(upper.top - level, 0.0, upper.rate))
            t += _prim_duration(upper)
            prims[i] = lower
            closed = True
            break
        if not closed and i >= len(prims):
            raise InvalidContourError("excursion never returns to its level")
        # frag heights were shifted; force the closing height to exact 0
        last = frag[-1]
        if isinstance(last, Fall) and last.bottom != 0.0:
            frag[-1] = Fall(last.top, 0.0, last.rate)
        excursions.append(
            Excursion(level=level, path=canonicalize(frag), start_time=start_time)
        )
    return excursions


# -- distance ---------------------------------------------------------------


def _eval_left(c: PLJContour, t: float) -> float:
    """Left limit f(t-); f(0-) is 0 by convention."""
    if t <= 0.0:
        return 0.0
    value = 0.0
    for p, start in zip(c.prims, c._starts):
        if isinstance(p, Jump):
            if start >= t:
                return value
            value = p.top
        else:
            dur = _prim_duration(p)
            if t <= start + dur:
                return p.top - (t - start) * p.rate
            value = p.bottom
    return value


def _identity_warp_sup(c1: PLJContour, c2: PLJContour) -> float:
    """sup |f1 - f2| under the identity warp, shorter contour padded with 0.

    Both functions are piecewise linear between the union of their
    breakpoints, so the sup is attained at one-sided limits there.
    """
    times = sorted({0.0}
                   | {t for t, _, _ in c1.breakpoints()}
                   | {t for t, _, _ in c2.breakpoints()})
    m1, m2 = c1.duration, c2.duration

    def right(c, m, t):
        return 0.0 if t >= m else c.eval(t)

    def left(c, m, t):
        return 0.0 if t > m else _eval_left(c, t)

    sup = 0.0
    for t in times:
        sup = max(sup, abs(right(c1, m1, t) - right(c2, m2, t)))
        sup = max(sup, abs(left(c1, m1, t) - left(c2, m2, t)))
    return sup


def contour_distance(c1: PLJContour, c2: PLJContour) -> float:
    """Upper bound on the tree distance d_J1(f1, f2) + |m1 - m2|.

    Candidate warps: the monotone alignment matching jump breakpoints
    one-to-one (when jump counts agree), the identity warp, and the uniform
    fallback max(sup f1, sup f2); the cheapest valid bound wins.  The warp
    cost includes the anchor time distortion, so the result is 0 iff the
    canonical forms are identical.  Used for regression comparisons only,
    never in exact identities.
    """
    if c1 == c2:
        return 0.0
    j1 = [(t, p.bottom, p.top) for (p, t) in zip(c1.prims, c1._starts) if isinstance(p, Jump)]
    j2 = [(t, p.bottom, p.top) for (p, t) in zip(c2.prims, c2._starts) if isinstance(p, Jump)]
    candidates = [max(c1.max_height, c2.max_height), _identity_warp_sup(c1, c2)]
    if len(j1) == len(j2):
        # between matched anchors both sections fall monotonically, so the
        # piecewise-linear warp cost is attained at the anchors themselves
        cost = 0.0
        for (t1, b1, h1), (t2, b2, h2) in zip(j1, j2):
            cost = max(cost, abs(b1 - b2), abs(h1 - h2), abs(t1 - t2))
        candidates.append(cost)
    return min(candidates) + abs(c1.duration - c2.duration)
