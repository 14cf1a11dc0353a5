import math

import pytest
from hypothesis import given, settings, strategies as st

from tomtree import (
    ChronoTree,
    DegenerateSubtreeError,
    Individual,
    PointRef,
    alive_count,
    canonical_serialization,
    dist,
    encode,
    explore,
    isomorphic,
    measure_left,
    mrca,
    normalize_point,
    order_cmp,
    subtree_right,
    subtree_rooted,
    truncate,
    upcrossings,
    validate,
)
from util_trees import random_tree, t1, t2

LT, EQ, GT = -1, 0, 1


class TestValidate:
    def test_well_formed(self):
        assert validate(t1()) == []

    def test_zero_lifetime(self):
        tree = ChronoTree([Individual(0, None, 0.0, 0.0)])
        assert any("zero lifetime" in v for v in validate(tree))

    def test_tied_birth_heights(self):
        tree = ChronoTree([
            Individual(0, None, 0.0, 2.0),
            Individual(1, 0, 0.7, 1.0),
            Individual(2, 0, 0.7, 1.2),
        ])
        assert any("tied birth heights" in v for v in validate(tree))

    def test_dangling_parent(self):
        tree = ChronoTree([Individual(0, None, 0.0, 1.0), Individual(1, 9, 0.5, 0.9)])
        assert any("dangling parent" in v for v in validate(tree))

    def test_near_tie_flagged(self):
        tree = ChronoTree([
            Individual(0, None, 0.0, 2.0),
            Individual(1, 0, 0.7, 1.0),
            Individual(2, 0, 0.7 + 1e-10, 1.2),
        ])
        assert any("within tolerance" in v for v in validate(tree))

    def test_root_shift_normalization(self):
        tree = ChronoTree([Individual(0, None, 1.0, 3.0), Individual(1, 0, 2.0, 3.5)])
        assert tree.root.birth == 0.0
        assert tree.individuals[1].birth == 1.0


class TestMrca:
    def test_cross_segments(self):
        assert mrca(t1(), PointRef(1, 2.0), PointRef(0, 1.8)) == PointRef(0, 1.0)

    def test_idempotent(self):
        p = PointRef(0, 0.5)
        assert mrca(t1(), p, p) == p

    def test_ancestor(self):
        assert mrca(t1(), PointRef(0, 0.3), PointRef(1, 2.2)) == PointRef(0, 0.3)

    def test_invalid_point(self):
        from tomtree import InvalidPointError

        with pytest.raises(InvalidPointError):
            mrca(t1(), PointRef(9, 0.5), PointRef(0, 0.5))
        with pytest.raises(InvalidPointError):
            mrca(t1(), PointRef(1, 0.2), PointRef(0, 0.5))


class TestDist:
    def test_examples(self):
        tree = t1()
        assert dist(tree, PointRef(1, 2.0), PointRef(0, 1.8)) == pytest.approx(1.8)
        assert dist(tree, PointRef(0, 0.4), PointRef(0, 0.4)) == 0.0
        assert dist(tree, PointRef(0, 0.0), PointRef(1, 2.5)) == pytest.approx(2.5)

    def test_four_point_condition(self):
        # 0-hyperbolicity on random quadruples
        tree = random_tree(5, 1)
        import numpy as np

        rng = np.random.default_rng(0)
        m = tree.total_measure
        for _ in range(1000):
            pts = [explore(tree, m * rng.random()) for _ in range(4)]
            d = lambda a, b: dist(tree, pts[a], pts[b])
            sums = sorted([d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2)])
            assert sums[2] - sums[1] <= 1e-9


class TestOrder:
    def test_examples(self):
        tree = t1()
        assert order_cmp(tree, PointRef(0, 1.8), PointRef(1, 2.0)) == LT
        assert order_cmp(tree, PointRef(0, 0.5), PointRef(0, 1.8)) == GT
        p = PointRef(1, 1.7)
        assert order_cmp(tree, p, p) == EQ

    def test_or1_ancestors_later(self):
        # p1 strict ancestor of p2 implies p2 < p1
        tree = random_tree(6, 0)
        import numpy as np

        rng = np.random.default_rng(1)
        m = tree.total_measure
        for _ in range(200):
            p1 = explore(tree, m * rng.random())
            p2 = explore(tree, m * rng.random())
            a = mrca(tree, p1, p2)
            if a == normalize_point(tree, p1) and a != normalize_point(tree, p2):
                assert order_cmp(tree, p2, p1) == LT

    def test_or2_between_points(self):
        tree = random_tree(7, 2)
        import numpy as np

        rng = np.random.default_rng(2)
        m = tree.total_measure
        for _ in range(200):
            p1 = explore(tree, m * rng.random())
            p2 = explore(tree, m * rng.random())
            if order_cmp(tree, p1, p2) != LT:
                p1, p2 = p2, p1
            if order_cmp(tree, p1, p2) != LT:
                continue
            a = mrca(tree, p1, p2)
            q1 = normalize_point(tree, p1)
            if a == q1:
                continue
            # sample a point strictly between p1 and the mrca along the path
            lam = rng.random()
            h = a.height + (q1.height - a.height) * lam
            chain_pt = _point_on_path(tree, q1, h)
            if chain_pt is None:
                continue
            assert order_cmp(tree, chain_pt, p2) == LT

    def test_mes1_strict_monotone(self):
        tree = random_tree(8, 1)
        import numpy as np

        rng = np.random.default_rng(3)
        m = tree.total_measure
        for _ in range(200):
            p1 = explore(tree, m * rng.random())
            p2 = explore(tree, m * rng.random())
            c = order_cmp(tree, p1, p2)
            m1, m2 = measure_left(tree, p1), measure_left(tree, p2)
            if c == LT:
                assert m1 < m2
            elif c == GT:
                assert m1 > m2


def _point_on_path(tree, p, h):
    """The point at height h on [rho, p], as a PointRef, if representable."""
    from tomtree.chrono import _ancestor_chain

    for k, top in _ancestor_chain(tree, p):
        ind = tree.individuals[k]
        if ind.birth < h <= top:
            return PointRef(k, h)
    if h <= 0:
        return PointRef(tree.root_id, 0.0)
    return None


class TestMeasureLeftExplore:
    def test_measure_left_examples(self):
        tree = t1()
        assert measure_left(tree, PointRef(1, 2.0)) == pytest.approx(1.5)
        assert measure_left(tree, PointRef(0, 0.0)) == pytest.approx(3.5)
        assert measure_left(tree, PointRef(0, 2.0)) == 0.0

    def test_explore_examples(self):
        tree = t1()
        assert explore(tree, 1.5) == PointRef(1, 2.0)
        assert explore(tree, 3.5) == PointRef(0, 0.0)
        assert explore(tree, 0.0) == PointRef(0, 2.0)

    def test_explore_out_of_range(self):
        from tomtree import InvalidPointError

        with pytest.raises(InvalidPointError):
            explore(t1(), 4.0)

    def test_explore_inverse_on_endpoints_and_random(self):
        tree = random_tree(9, 0)
        import numpy as np

        # segment endpoints round-trip exactly (no height arithmetic)
        for ind in tree.individuals.values():
            for h in (ind.birth, ind.death):
                q = normalize_point(tree, PointRef(ind.id, h))
                assert explore(tree, measure_left(tree, q)) == q
        # interior points round-trip to the same point within tolerance
        rng = np.random.default_rng(4)
        m = tree.total_measure
        for _ in range(1000):
            q = explore(tree, m * rng.random())
            back = explore(tree, measure_left(tree, q))
            assert back.individual == q.individual
            assert back.height == pytest.approx(q.height, abs=1e-9)

    def test_mes2_no_atoms(self):
        # measure_left(explore(t)) == t on the dense image set
        tree = random_tree(10, 1)
        import numpy as np

        rng = np.random.default_rng(5)
        m = tree.total_measure
        for _ in range(500):
            t = m * rng.random()
            assert measure_left(tree, explore(tree, t)) == pytest.approx(t, abs=1e-9)


class TestTruncate:
    def test_clip_both(self):
        out = truncate(t1(), 1.5)
        assert canonical_serialization(out) == canonical_serialization(
            ChronoTree([Individual(0, None, 0.0, 1.5), Individual(1, 0, 1.0, 1.5)])
        )

    def test_above_height_identity(self):
        tree = t1()
        assert isomorphic(truncate(tree, 10.0), tree)

    def test_drop_child(self):
        out = truncate(t1(), 0.8)
        assert canonical_serialization(out) == canonical_serialization(
            ChronoTree([Individual(0, None, 0.0, 0.8)])
        )

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            truncate(t1(), -1.0)

    def test_tower_bit_exact(self):
        for i in range(30):
            tree = random_tree(11, i)
            import numpy as np

            rng = np.random.default_rng(i)
            h = tree.height
            r1, r2 = sorted(h * (0.2 + 0.75 * rng.random(2)))
            if r1 == r2:
                continue
            a = truncate(truncate(tree, r2), r1)
            b = truncate(tree, r1)
            assert canonical_serialization(a) == canonical_serialization(b)


class TestSubtrees:
    def test_right_mid_segment(self):
        out = subtree_right(t1(), PointRef(1, 2.0))
        assert canonical_serialization(out) == canonical_serialization(
            ChronoTree([Individual(0, None, 0.0, 2.0)])
        )

    def test_right_first_point_is_whole_tree(self):
        tree = t1()
        assert isomorphic(subtree_right(tree, PointRef(0, 2.0)), tree)

    def test_right_at_root_degenerate(self):
        with pytest.raises(DegenerateSubtreeError):
            subtree_right(t1(), PointRef(0, 0.0))

    def test_right_measure_identity(self):
        tree = random_tree(12, 2)
        import numpy as np

        rng = np.random.default_rng(6)
        m = tree.total_measure
        for _ in range(50):
            t = m * rng.random() * 0.95
            p = explore(tree, t)
            if normalize_point(tree, p).height == 0.0:
                continue
            sub = subtree_right(tree, p)
            assert sub.total_measure == pytest.approx(
                m - measure_left(tree, p), abs=1e-9
            )

    def test_right_contour_is_suffix(self):
        from tomtree.contour import canonicalize, suffix_primitives, Jump

        tree = random_tree(13, 0)
        c = encode(tree)
        m = tree.total_measure
        import numpy as np

        rng = np.random.default_rng(7)
        for _ in range(25):
            t = m * rng.random() * 0.9
            p = explore(tree, t)
            q = normalize_point(tree, p)
            if q.height == 0.0:
                continue
            s_star = measure_left(tree, q)
            suffix = suffix_primitives(c, s_star)
            expected = canonicalize([Jump(0.0, suffix[0].top), *suffix])
            got = encode(subtree_right(tree, p))
            assert len(got.prims) == len(expected.prims)
            for a, b in zip(got.prims, expected.prims):
                assert type(a) is type(b)
                assert a.top == pytest.approx(b.top, abs=1e-9)
                assert a.bottom == pytest.approx(b.bottom, abs=1e-9)

    def test_right_contour_is_suffix_exact_at_segment_tops(self):
        from tomtree.contour import canonicalize, suffix_primitives, Jump

        tree = random_tree(13, 1)
        c = encode(tree)
        # at an individual's death point the suffix splice is arithmetic-free
        for ind in tree.individuals.values():
            p = PointRef(ind.id, ind.death)
            if normalize_point(tree, p).height == 0.0:
                continue
            s_star = measure_left(tree, p)
            suffix = suffix_primitives(c, s_star)
            expected = canonicalize([Jump(0.0, suffix[0].top), *suffix])
            assert encode(subtree_right(tree, p)) == expected

    def test_rooted_branch_point(self):
        out = subtree_rooted(t1(), PointRef(0, 1.0))
        assert canonical_serialization(out) == canonical_serialization(
            ChronoTree([Individual(0, None, 0.0, 1.0), Individual(1, 0, 0.0, 1.5)])
        )

    def test_rooted_at_root_identity(self):
        tree = t1()
        assert isomorphic(subtree_rooted(tree, PointRef(0, 0.0)), tree)

    def test_rooted_child_birth(self):
        out = subtree_rooted(t1(), PointRef(1, 1.0))
        assert canonical_serialization(out) == canonical_serialization(
            ChronoTree([Individual(0, None, 0.0, 1.5)])
        )

    def test_rooted_leaf_degenerate(self):
        with pytest.raises(DegenerateSubtreeError):
            subtree_rooted(t1(), PointRef(1, 2.5))


class TestAliveCount:
    def test_examples(self):
        tree = t1()
        assert alive_count(tree, 1.2) == 2
        assert alive_count(tree, 2.4) == 1
        assert alive_count(tree, 5.0) == 0

    def test_matches_upcrossings_on_grid(self):
        for i in range(20):
            tree = random_tree(14, i)
            c = encode(tree)
            hs = [k * tree.height / 23 for k in range(25)]
            for ind in tree.individuals.values():
                hs.extend([ind.birth, ind.death])
            for h in hs:
                assert alive_count(tree, h) == upcrossings(c, h)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), idx=st.integers(0, 29))
def test_canonical_serialization_stable(seed, idx):
    tree = random_tree(seed, idx)
    rebuilt = ChronoTree(list(tree.individuals.values()))
    assert canonical_serialization(rebuilt) == canonical_serialization(tree)
