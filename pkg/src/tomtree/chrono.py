"""Finite chronological trees as metric, totally ordered, measured objects.

An individual is a vertical segment [birth, death] with a per-segment measure
density ``speed``; children attach strictly inside the parent segment.  The
total order used throughout is the depth-first order that descends each
segment from death to birth and visits children at their birth heights in
decreasing birth order, which makes ``measure_left`` the exploration clock of
the jump-chronological contour.

Heights are plain floats and are *never* re-derived arithmetically by the
operations here: truncation and subtree extraction splice or clip stored
values, which is what makes the codec identities in :mod:`tomtree.contour`
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Optional

__all__ = [
    "EPS",
    "LT",
    "EQ",
    "GT",
    "Individual",
    "PointRef",
    "ChronoTree",
    "InvalidTreeError",
    "InvalidPointError",
    "DegenerateSubtreeError",
    "validate",
    "normalize_point",
    "mrca",
    "dist",
    "order_cmp",
    "measure_left",
    "explore",
    "truncate",
    "subtree_right",
    "subtree_rooted",
    "alive_count",
    "canonical_serialization",
    "isomorphic",
]

# Absolute tolerance for "forbidden tie" detection on heights.  Exact ties
# break the contour bijection; near ties are rejected at the input boundary
# (loader, simulator) because they come from continuous distributions where
# they have probability zero.
EPS = 1e-9

LT, EQ, GT = -1, 0, 1


class InvalidTreeError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid tree: " + "; ".join(self.violations))


class InvalidPointError(ValueError):
    pass


class DegenerateSubtreeError(ValueError):
    pass


@dataclass(frozen=True)
class Individual:
    """One vertical segment of the tree.

    ``speed`` is the measure density on the segment, so the segment carries
    total measure speed * (death - birth) and is traversed by the contour in
    that much time.
    """

    id: int
    parent: Optional[int]
    birth: float
    death: float
    speed: float = 1.0

    @property
    def lifetime(self) -> float:
        return self.death - self.birth

    @property
    def measure(self) -> float:
        return self.speed * (self.death - self.birth)


class PointRef(NamedTuple):
    """Address of a tree point: a height on one individual's segment."""

    individual: int
    height: float


class ChronoTree:
    """Immutable finite chronological tree.

    Construction is lenient: structural problems are recorded and reported by
    :func:`validate`; operations refuse to run on trees with hard violations.
    A root born at a nonzero height is normalized by shifting all heights.
    """

    __slots__ = (
        "individuals",
        "root_id",
        "_children",
        "_violations",
        "_entry",
        "_sub_measure",
        "_total_measure",
    )

    def __init__(self, individuals: Iterable[Individual]):
        inds = list(individuals)
        by_id = {}
        violations = []
        for ind in inds:
            if ind.id in by_id:
                violations.append(f"individual {ind.id}: duplicate id")
            by_id[ind.id] = ind

        roots = [i for i in by_id.values() if i.parent is None]
        root_id = roots[0].id if roots else None
        if len(roots) != 1:
            violations.append(f"expected exactly one root, found {len(roots)}")

        # Normalize so that the root is born at height 0.
        if root_id is not None and by_id[root_id].birth != 0.0:
            shift = by_id[root_id].birth
            by_id = {
                k: replace(v, birth=v.birth - shift, death=v.death - shift)
                for k, v in by_id.items()
            }

        children: dict = {k: [] for k in by_id}
        for ind in by_id.values():
            if ind.parent is not None:
                if ind.parent not in by_id:
                    violations.append(f"individual {ind.id}: dangling parent {ind.parent}")
                else:
                    children[ind.parent].append(ind.id)

        # Reachability from the root doubles as the cycle check.
        if root_id is not None:
            seen = set()
            stack = [root_id]
            while stack:
                k = stack.pop()
                if k in seen:
                    continue
                seen.add(k)
                stack.extend(children[k])
            if len(seen) != len(by_id):
                violations.append("unreachable individuals (parent links do not form a tree)")

        for k in children:
            children[k].sort(key=lambda c: -by_id[c].birth)
            children[k] = tuple(children[k])

        self.individuals = by_id
        self.root_id = root_id
        self._children = children
        self._violations = violations + _invariant_violations(by_id, children, root_id)
        self._entry = None
        self._sub_measure = None
        self._total_measure = None

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return len(self.individuals)

    def children(self, ind_id: int):
        return self._children[ind_id]

    @property
    def root(self) -> Individual:
        return self.individuals[self.root_id]

    @property
    def violations(self):
        return tuple(self._violations)

    def require_valid(self):
        if self._violations:
            raise InvalidTreeError(self._violations)

    @property
    def total_measure(self) -> float:
        self._ensure_caches()
        return self._total_measure

    @property
    def height(self) -> float:
        return max(i.death for i in self.individuals.values())

    # -- exploration caches --------------------------------------------------

    def _ensure_caches(self):
        if self._entry is not None:
            return
        self.require_valid()
        sub = {}
        # children-first pass (ids ordered so parents precede children)
        order = []
        stack = [self.root_id]
        while stack:
            k = stack.pop()
            order.append(k)
            stack.extend(self._children[k])
        for k in reversed(order):
            ind = self.individuals[k]
            sub[k] = ind.measure + sum(sub[c] for c in self._children[k])
        entry = {self.root_id: 0.0}
        for k in order:
            ind = self.individuals[k]
            t = entry[k]
            h = ind.death
            for c in self._children[k]:
                child = self.individuals[c]
                t += ind.speed * (h - child.birth)
                entry[c] = t
                t += sub[c]
                h = child.birth
        self._entry = entry
        self._sub_measure = sub
        self._total_measure = sub[self.root_id]

    def entry_time(self, ind_id: int) -> float:
        self._ensure_caches()
        return self._entry[ind_id]

    def subtree_measure(self, ind_id: int) -> float:
        self._ensure_caches()
        return self._sub_measure[ind_id]


def _invariant_violations(by_id, children, root_id):
    out = []
    for ind in by_id.values():
        if not ind.death > ind.birth:
            out.append(f"individual {ind.id}: zero lifetime")
        if not ind.speed > 0:
            out.append(f"individual {ind.id}: non-positive speed")
        if ind.parent is not None and ind.parent in by_id:
            par = by_id[ind.parent]
            gap_birth = ind.birth - par.birth
            if gap_birth < 0:
                out.append(f"individual {ind.id}: born below parent birth")
            elif gap_birth == 0.0:
                # A child sprouting at the root point itself is the one legal
                # branch-at-birth configuration (it arises from re-rooting).
                if par.parent is not None:
                    out.append(f"individual {ind.id}: birth equals parent birth")
            elif gap_birth <= EPS:
                out.append(f"individual {ind.id}: birth within tolerance of parent birth")
            if ind.birth > par.death:
                out.append(f"individual {ind.id}: born above parent death")
            elif par.death - ind.birth <= EPS:
                out.append(f"individual {ind.id}: birth within tolerance of parent death")
    for k, kids in children.items():
        births = sorted(by_id[c].birth for c in kids)
        for a, b in zip(births, births[1:]):
            if b - a == 0.0:
                out.append(f"individual {k}: tied birth heights among children")
            elif b - a <= EPS:
                out.append(f"individual {k}: child births within tolerance of each other")
    return out


def validate(tree: ChronoTree):
    """All invariant violations of ``tree`` (empty list means well formed)."""
    return list(tree.violations)


# -- points ------------------------------------------------------------------


def _check_point(tree: ChronoTree, p: PointRef) -> PointRef:
    ind = tree.individuals.get(p.individual)
    if ind is None:
        raise InvalidPointError(f"no individual {p.individual}")
    h = p.height
    # tolerate query heights within EPS of the segment, clamping exactly
    if h < ind.birth:
        if ind.birth - h > EPS:
            raise InvalidPointError(f"height {h} below segment of {p.individual}")
        h = ind.birth
    if h > ind.death:
        if h - ind.death > EPS:
            raise InvalidPointError(f"height {h} above segment of {p.individual}")
        h = ind.death
    return PointRef(p.individual, h)


def normalize_point(tree: ChronoTree, p: PointRef) -> PointRef:
    """Canonical address: a child's birth point belongs to the parent."""
    p = _check_point(tree, p)
    ind = tree.individuals[p.individual]
    while ind.parent is not None and p.height == ind.birth:
        p = PointRef(ind.parent, p.height)
        ind = tree.individuals[ind.parent]
    return p


def _ancestor_chain(tree: ChronoTree, p: PointRef):
    """[(individual id, top height of the stretch owned by it)] down to the root.

    Entry k covers the part of the path [rho, p] lying on individual k; its
    top height is p.height for the first entry and the child's birth height
    for the others.
    """
    chain = []
    ind = tree.individuals[p.individual]
    top = p.height
    while True:
        chain.append((ind.id, top))
        if ind.parent is None:
            return chain
        top = ind.birth
        ind = tree.individuals[ind.parent]


def mrca(tree: ChronoTree, p1: PointRef, p2: PointRef) -> PointRef:
    """Most recent common ancestor point of p1 and p2."""
    tree.require_valid()
    p1 = normalize_point(tree, p1)
    p2 = normalize_point(tree, p2)
    c1 = {k: top for k, top in _ancestor_chain(tree, p1)}
    for k, top2 in _ancestor_chain(tree, p2):
        if k in c1:
            h = min(c1[k], top2)
            return normalize_point(tree, PointRef(k, h))
    raise InvalidPointError("points lie in disconnected components")


def dist(tree: ChronoTree, p1: PointRef, p2: PointRef) -> float:
    """Tree metric d(p1, p2) = d(p1, rho) + d(p2, rho) - 2 d(p1 ^ p2, rho)."""
    p1 = normalize_point(tree, p1)
    p2 = normalize_point(tree, p2)
    if p1 == p2:
        return 0.0
    m = mrca(tree, p1, p2)
    return p1.height + p2.height - 2.0 * m.height


def measure_left(tree: ChronoTree, p: PointRef) -> float:
    """Measure of the left set {q : q <= p}, i.e. the exploration time of p.

    Accumulates in the same order as :func:`explore` walks, so exploration
    round trips are exact at segment endpoints.
    """
    tree._ensure_caches()
    p = normalize_point(tree, p)
    ind = tree.individuals[p.individual]
    t = tree.entry_time(ind.id)
    h = ind.death
    for c in tree.children(ind.id):
        cb = tree.individuals[c].birth
        if cb < p.height:
            break
        t += ind.speed * (h - cb)
        t += tree.subtree_measure(c)
        h = cb
    t += ind.speed * (h - p.height)
    return t


def order_cmp(tree: ChronoTree, p1: PointRef, p2: PointRef) -> int:
    """Total order: LT(-1)/EQ(0)/GT(1); agrees with exploration time."""
    q1 = normalize_point(tree, p1)
    q2 = normalize_point(tree, p2)
    if q1 == q2:
        return EQ
    t1 = measure_left(tree, q1)
    t2 = measure_left(tree, q2)
    if t1 < t2:
        return LT
    if t1 > t2:
        return GT
    return EQ


def explore(tree: ChronoTree, t: float) -> PointRef:
    """Exploration process phi(t): the cadlag right inverse of measure_left."""
    tree._ensure_caches()
    m = tree.total_measure
    if t < 0 or t > m:
        if -EPS <= t < 0:
            t = 0.0
        elif m < t <= m + EPS:
            t = m
        else:
            raise InvalidPointError(f"exploration time {t} outside [0, {m}]")
    if t == m:
        return PointRef(tree.root_id, tree.root.birth)
    k = tree.root_id
    while True:
        ind = tree.individuals[k]
        tau = tree.entry_time(k)
        h = ind.death
        descended = False
        for c in tree.children(k):
            child = tree.individuals[c]
            dt = ind.speed * (h - child.birth)
            if t < tau + dt:
                return PointRef(k, h - (t - tau) / ind.speed)
            tau += dt
            if t < tau + tree.subtree_measure(c):
                k = c
                descended = True
                break
            tau += tree.subtree_measure(c)
            h = child.birth
        if descended:
            continue
        dt = ind.speed * (h - ind.birth)
        if t < tau + dt:
            return PointRef(k, h - (t - tau) / ind.speed)
        # exactly at the bottom of this individual's segment
        return normalize_point(tree, PointRef(k, ind.birth))


# -- structural operations -----------------------------------------------


def truncate(tree: ChronoTree, r: float) -> ChronoTree:
    """Restriction to heights <= r: deaths clipped, individuals born above r dropped."""
    tree.require_valid()
    if not r > 0:
        raise ValueError("truncation level must be positive")
    if math.isinf(r):
        return tree
    out = []
    for ind in tree.individuals.values():
        if ind.birth > r:
            continue
        if ind.birth == r:
            raise ValueError(
                f"individual {ind.id} born exactly at truncation level {r}"
            )
        if ind.death > r:
            out.append(replace(ind, death=r))
        else:
            out.append(ind)
    return ChronoTree(out)


def subtree_right(tree: ChronoTree, p: PointRef) -> ChronoTree:
    """The subtree R_p = {q : q >= p}, rooted at rho.

    The ancestral path [rho, p] becomes the trunk; adjacent trunk portions
    with equal speed are merged (segment boundaries on a bare path are not
    intrinsic to the TOM tree).  Everything explored at or after p hangs off
    the trunk where it did before.
    """
    tree._ensure_caches()
    p = normalize_point(tree, p)
    if p.height == 0.0:
        raise DegenerateSubtreeError("subtree to the right of the root is a single point")
    chain = _ancestor_chain(tree, p)  # [(id, top)] from p's individual to root

    # trunk portions from the root upward: (speed, top_height)
    portions = []
    for k, top in reversed(chain):
        spd = tree.individuals[k].speed
        if portions and portions[-1][0] == spd:
            portions[-1] = (spd, top)
        else:
            portions.append((spd, top))

    out = []
    next_id = 0
    trunk_of_height = []  # (low, high, trunk id) for attachment lookup
    prev_id = None
    low = 0.0
    for spd, top in portions:
        out.append(Individual(next_id, prev_id, low, top, spd))
        trunk_of_height.append((low, top, next_id))
        prev_id = next_id
        next_id += 1
        low = top

    def trunk_at(h: float) -> int:
        for lo, hi, tid in trunk_of_height:
            if lo <= h < hi or (h == hi and hi == p.height):
                return tid
        raise AssertionError("attachment height off the trunk")

    id_map = {}
    chain_ids = {k for k, _ in chain}
    for k, top in chain:
        for c in tree.children(k):
            child = tree.individuals[c]
            if c in chain_ids or child.birth >= top:
                continue
            # copy the full descendance of c verbatim, re-parenting c
            stack = [(c, trunk_at(child.birth))]
            while stack:
                cid, new_parent = stack.pop()
                ind = tree.individuals[cid]
                id_map[cid] = next_id
                out.append(replace(ind, id=next_id, parent=new_parent))
                next_id += 1
                for g in tree.children(cid):
                    stack.append((g, id_map[cid]))
    return ChronoTree(out)


def subtree_rooted(tree: ChronoTree, p: PointRef) -> ChronoTree:
    """The descendance of the addressed segment point, re-rooted at height 0.

    The address is *not* normalized: (individual, birth height) means the
    branch spanned by that individual, while the same height addressed on the
    parent also carries the parent's continuation.
    """
    tree.require_valid()
    p = _check_point(tree, p)
    ind = tree.individuals[p.individual]
    has_kids = any(
        tree.individuals[c].birth >= p.height for c in tree.children(ind.id)
    )
    if p.height == ind.death and not has_kids:
        raise DegenerateSubtreeError("subtree rooted at a leaf point is degenerate")
    h = p.height
    out = [Individual(0, None, 0.0, ind.death - h, ind.speed)]
    id_map = {ind.id: 0}
    next_id = 1
    stack = []
    for c in tree.children(ind.id):
        if tree.individuals[c].birth >= h:
            stack.append((c, 0))
    while stack:
        cid, new_parent = stack.pop()
        cur = tree.individuals[cid]
        id_map[cid] = next_id
        out.append(
            Individual(next_id, new_parent, cur.birth - h, cur.death - h, cur.speed)
        )
        next_id += 1
        for g in tree.children(cid):
            stack.append((g, id_map[cid]))
    return ChronoTree(out)


def alive_count(tree: ChronoTree, h: float) -> int:
    """Number of individuals alive at height h (birth <= h < death)."""
    if h < 0:
        return 0
    return sum(1 for i in tree.individuals.values() if i.birth <= h < i.death)


# -- canonical form ----------------------------------------------------------


def exploration_order(tree: ChronoTree):
    """Individual ids in the order their segments are first visited."""
    tree.require_valid()
    order = []
    stack = [tree.root_id]
    while stack:
        k = stack.pop()
        order.append(k)
        # children are explored in decreasing birth order; push reversed so
        # the highest-born child is popped first
        stack.extend(reversed(tree.children(k)))
    return order


def canonical_serialization(tree: ChronoTree) -> str:
    """Canonical text form: ids renumbered in exploration order.

    Two trees are isomorphic as TOM trees iff their canonical serializations
    agree (for trees without chained segment boundaries, which none of the
    constructors here produce).
    """
    order = exploration_order(tree)
    renum = {k: n for n, k in enumerate(order)}
    lines = []
    for k in order:
        ind = tree.individuals[k]
        par = "~" if ind.parent is None else str(renum[ind.parent])
        lines.append(f"{renum[k]} {par} {ind.birth!r} {ind.death!r} {ind.speed!r}")
    return "\n".join(lines)


def isomorphic(t1: ChronoTree, t2: ChronoTree) -> bool:
    return canonical_serialization(t1) == canonical_serialization(t2)
