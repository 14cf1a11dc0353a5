import math

import pytest
from hypothesis import given, settings, strategies as st

from tomtree import (
    ChronoTree,
    Individual,
    InvalidContourError,
    PLJContour,
    canonical_serialization,
    contour_distance,
    contour_from_sizes,
    decode,
    dist,
    encode,
    excursions_above_min,
    explore,
    isomorphic,
    time_change,
    truncate,
    upcrossings,
)
from tomtree.contour import Fall, Jump, canonicalize
from util_trees import random_tree, t1, t2


class TestCanonicalize:
    def test_merge_equal_rate_falls(self):
        c = contour_from_sizes([("J", 2), ("F", 1, 1), ("J", 1.5), ("F", 1.5, 1), ("F", 1, 1)])
        assert c == contour_from_sizes([("J", 2), ("F", 1, 1), ("J", 1.5), ("F", 2.5, 1)])

    def test_already_canonical(self):
        c = contour_from_sizes([("J", 3), ("F", 3, 1)])
        assert [type(p).__name__ for p in c.prims] == ["Jump", "Fall"]

    def test_negative_height_rejected(self):
        with pytest.raises(InvalidContourError):
            contour_from_sizes([("J", 1), ("F", 2, 1)])

    def test_terminal_mismatch_rejected(self):
        with pytest.raises(InvalidContourError):
            contour_from_sizes([("J", 3), ("F", 1, 1)])

    def test_merge_consecutive_jumps(self):
        c = canonicalize([Jump(0.0, 1.0), Jump(1.0, 2.5), Fall(2.5, 0.0, 1.0)])
        assert c.prims == (Jump(0.0, 2.5), Fall(2.5, 0.0, 1.0))

    def test_idempotent(self):
        c = encode(t2())
        assert canonicalize(c.prims) == c


class TestEval:
    def test_linear_descent(self):
        c = contour_from_sizes([("J", 3), ("F", 3, 1)])
        assert c.eval(1.0) == pytest.approx(2.0)

    def test_right_limit_at_jump(self):
        c = encode(t1())
        assert c.eval(1.0) == pytest.approx(2.5)

    def test_terminal_zero(self):
        c = encode(t1())
        assert c.eval(3.5) == 0.0

    def test_out_of_range(self):
        with pytest.raises(InvalidContourError):
            encode(t1()).eval(5.0)


class TestEncode:
    def test_single_segment(self):
        tree = ChronoTree([Individual(0, None, 0.0, 3.0)])
        assert encode(tree) == contour_from_sizes([("J", 3), ("F", 3, 1)])

    def test_t1(self):
        c = encode(t1())
        assert c == contour_from_sizes([("J", 2), ("F", 1, 1), ("J", 1.5), ("F", 2.5, 1)])
        assert c.duration == pytest.approx(3.5)

    def test_t2(self):
        c = encode(t2())
        assert c == contour_from_sizes(
            [("J", 2), ("F", 1, 1), ("J", 1.5), ("F", 2, 1), ("J", 0.4), ("F", 0.9, 1)]
        )
        assert c.duration == pytest.approx(3.9)

    def test_jump_count_and_duration(self):
        for i in range(20):
            tree = random_tree(21, i)
            c = encode(tree)
            assert c.jump_count == len(tree)
            assert c.duration == pytest.approx(tree.total_measure, abs=1e-9)

    def test_speed_maps_to_rate(self):
        tree = ChronoTree([Individual(0, None, 0.0, 2.0, speed=2.0)])
        c = encode(tree)
        assert c.prims == (Jump(0.0, 2.0), Fall(2.0, 0.0, 0.5))
        assert c.duration == pytest.approx(4.0)


class TestDecode:
    def test_single(self):
        tree = decode(contour_from_sizes([("J", 3), ("F", 3, 1)]))
        assert canonical_serialization(tree) == canonical_serialization(
            ChronoTree([Individual(0, None, 0.0, 3.0)])
        )

    def test_t1_t2(self):
        assert isomorphic(decode(encode(t1())), t1())
        assert isomorphic(decode(encode(t2())), t2())

    def test_ambiguous_attachment_rejected(self):
        # two children of the same parent at the same height
        prims = [
            Jump(0.0, 2.0),
            Fall(2.0, 0.7, 1.0),
            Jump(0.7, 1.5),
            Fall(1.5, 0.7, 1.0),
            Jump(0.7, 1.0),
            Fall(1.0, 0.0, 1.0),
        ]
        with pytest.raises(InvalidContourError):
            decode(PLJContour(prims))

    def test_rate_change_mid_segment_rejected(self):
        prims = [Jump(0.0, 3.0), Fall(3.0, 1.0, 1.0), Fall(1.0, 0.0, 2.0)]
        with pytest.raises(InvalidContourError):
            decode(PLJContour(prims))

    def test_negative_jump_unrepresentable(self):
        with pytest.raises(InvalidContourError):
            canonicalize([Jump(0.0, 2.0), Jump(2.0, 1.0), Fall(1.0, 0.0, 1.0)])

    def test_non_canonical_input_rejected(self):
        # consecutive equal-rate falls bypassing canonicalize
        prims = (Jump(0.0, 3.0), Fall(3.0, 1.0, 1.0), Fall(1.0, 0.0, 1.0))
        with pytest.raises(InvalidContourError, match="non-canonical"):
            decode(PLJContour(prims))


class TestRoundTrips:
    def test_roundtrip_a_bit_exact(self):
        for i in range(200):
            tree = random_tree(22, i)
            c = encode(tree)
            assert encode(decode(c)) == c

    def test_roundtrip_b_canonical_serialization(self):
        for i in range(200):
            tree = random_tree(23, i)
            back = decode(encode(tree))
            assert canonical_serialization(back) == canonical_serialization(tree)


class TestTimeChange:
    def test_simple_clip(self):
        c = contour_from_sizes([("J", 3), ("F", 3, 1)])
        assert time_change(c, 2.0) == contour_from_sizes([("J", 2), ("F", 2, 1)])

    def test_t1_clip(self):
        c = time_change(encode(t1()), 1.5)
        assert c == contour_from_sizes([("J", 1.5), ("F", 0.5, 1), ("J", 0.5), ("F", 1.5, 1)])
        # total duration is the truncated tree's measure: 1.5 + 0.5
        assert c.duration == pytest.approx(2.0)

    def test_above_max_identity(self):
        c = encode(t2())
        assert time_change(c, 10.0) == c

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            time_change(encode(t1()), 0.0)

    def test_commutation_exact(self):
        import numpy as np

        rng = np.random.default_rng(11)
        for i in range(100):
            tree = random_tree(24, i)
            r = tree.height * (0.15 + 0.8 * rng.random())
            assert encode(truncate(tree, r)) == time_change(encode(tree), r)

    def test_tower_exact(self):
        import numpy as np

        rng = np.random.default_rng(12)
        for i in range(100):
            c = encode(random_tree(25, i))
            r1, r2 = sorted(c.max_height * (0.15 + 0.8 * rng.random(2)))
            if r1 == r2:
                continue
            assert time_change(time_change(c, r2), r1) == time_change(c, r1)


class TestExcursions:
    def test_t2_from_midpoint(self):
        excs = excursions_above_min(encode(t2()), 1.5)
        assert len(excs) == 1
        assert excs[0].level == pytest.approx(0.5)
        assert excs[0].length == pytest.approx(0.4)

    def test_pure_staircase(self):
        assert excursions_above_min(contour_from_sizes([("J", 3), ("F", 3, 1)]), 0.0) == []

    def test_t1_from_zero(self):
        excs = excursions_above_min(encode(t1()), 0.0)
        assert len(excs) == 1
        assert excs[0].level == pytest.approx(1.0)
        assert excs[0].length == pytest.approx(1.5)

    def test_excursion_paths_decode(self):
        for exc in excursions_above_min(encode(t2()), 0.0):
            sub = decode(exc.path)
            assert sub.total_measure == pytest.approx(exc.length)


class TestUpcrossings:
    def test_examples(self):
        c = encode(t1())
        assert upcrossings(c, 1.2) == 2
        assert upcrossings(c, 2.4) == 1
        assert upcrossings(c, 5.0) == 0


class TestDfConsistency:
    def test_distance_identity(self):
        import numpy as np

        rng = np.random.default_rng(13)
        for i in range(20):
            tree = random_tree(26, i)
            c = encode(tree)
            back = decode(c)
            m = c.duration
            for _ in range(50):
                u1, u2 = sorted(m * rng.random(2))
                want = c.eval(u1) + c.eval(u2) - 2.0 * c.min_between(u1, u2)
                got = dist(back, explore(back, u1), explore(back, u2))
                assert got == pytest.approx(want, abs=1e-9)


class TestContourDistance:
    def test_zero_on_equal(self):
        c = encode(t2())
        assert contour_distance(c, c) == 0.0

    def test_small_perturbation(self):
        c1 = contour_from_sizes([("J", 3), ("F", 3, 1)])
        c2 = contour_from_sizes([("J", 3.1), ("F", 3.1, 1)])
        d = contour_distance(c1, c2)
        assert 0 < d <= 0.2 + 1e-12

    def test_uniform_fallback(self):
        c1 = contour_from_sizes([("J", 1), ("F", 1, 1)])
        c2 = contour_from_sizes([("J", 2), ("F", 2, 1)])
        assert contour_distance(c1, c2) <= 2.0 + 1e-12

    def test_symmetric(self):
        c1 = encode(t1())
        c2 = encode(t2())
        assert contour_distance(c1, c2) == contour_distance(c2, c1)

    def test_positive_on_rate_difference(self):
        c1 = contour_from_sizes([("J", 2), ("F", 2, 1)])
        c2 = contour_from_sizes([("J", 2), ("F", 1, 2)])
        assert contour_distance(c1, c2) > 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), idx=st.integers(0, 20))
def test_roundtrip_property(seed, idx):
    tree = random_tree(seed, idx)
    c = encode(tree)
    assert encode(decode(c)) == c
    assert canonical_serialization(decode(c)) == canonical_serialization(tree)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), idx=st.integers(0, 20),
       frac=st.floats(0.05, 0.95))
def test_commutation_property(seed, idx, frac):
    tree = random_tree(seed, idx)
    r = tree.height * frac
    if r <= 0:
        return
    try:
        trunc = truncate(tree, r)
    except ValueError:
        return  # birth exactly at r (measure zero)
    assert encode(trunc) == time_change(encode(tree), r)


class TestRootedSubtreeWindow:
    """The rooted subtree's contour is the window of the parent contour."""

    def test_window_formula_random(self):
        import numpy as np
        from tomtree import PointRef, measure_left, subtree_rooted
        from tomtree.contour import position_of

        rng = np.random.default_rng(31)
        for i in range(30):
            tree = random_tree(61, i)
            c = encode(tree)
            inds = list(tree.individuals.values())
            ind = inds[rng.integers(len(inds))]
            h = float(ind.birth + (ind.death - ind.birth) * rng.random())
            if h == ind.death or h == ind.birth:
                continue
            p = PointRef(ind.id, h)
            sub = subtree_rooted(tree, p)
            g = encode(sub)
            # s^* is the exploration time of p; s_* is the segment's entry
            # time (s^* - measure(subtree) up to rounding, but exact as the
            # stored entry, which keeps the window start on the jump)
            s_hi = measure_left(tree, p)
            s_lo = tree.entry_time(ind.id)
            assert s_hi - sub.total_measure == pytest.approx(s_lo, abs=1e-9)
            # g(u) == f(u + s_lo) - h on a grid of the window
            for lam in (0.0, 0.21, 0.5, 0.83, 0.999):
                u = (s_hi - s_lo) * lam
                assert g.eval(u) == pytest.approx(
                    c.eval(s_lo + u) - h, abs=1e-9
                )

    def test_entry_times_exact(self):
        from tomtree import PointRef, explore, measure_left

        for i in range(20):
            tree = random_tree(62, i)
            for k in tree.individuals:
                entry = tree.entry_time(k)
                ind = tree.individuals[k]
                assert explore(tree, entry) == PointRef(k, ind.death)
                assert measure_left(tree, PointRef(k, ind.death)) == entry


class TestNonUnitRates:
    def test_q_contour_decode_roundtrip(self):
        # contours sampled directly (not via encode), rates 2 and 4
        from tomtree import Exponential, LevyParams, rng_from, simulate_qxr_contour

        for drift in (2.0, 4.0):
            p = LevyParams(drift=drift, jump_rate=1.0, jump_law=Exponential(2.0))
            for i in range(40):
                c, _ = simulate_qxr_contour(p, 0.8, 2.5, rng_from(71, int(drift), i))
                tree = decode(c)
                assert encode(tree) == c
                for ind in tree.individuals.values():
                    assert ind.speed == 1.0 / drift

    def test_mixed_speed_tree_roundtrip(self):
        tree = ChronoTree([
            Individual(0, None, 0.0, 2.0, speed=2.0),
            Individual(1, 0, 1.0, 2.5, speed=0.5),
            Individual(2, 0, 0.5, 0.9, speed=1.0),
        ])
        c = encode(tree)
        rates = [p.rate for p in c.prims if isinstance(p, Fall)]
        assert rates == [0.5, 2.0, 0.5, 1.0, 0.5]
        back = decode(c)
        assert canonical_serialization(back) == canonical_serialization(tree)
        assert encode(back) == c
        assert back.total_measure == pytest.approx(tree.total_measure)


def test_contour_is_height_of_exploration():
    # the definitional identity: f(t) = d(rho, phi(t))
    import numpy as np
    from tomtree import explore, normalize_point

    rng = np.random.default_rng(77)
    for i in range(30):
        tree = random_tree(78, i)
        c = encode(tree)
        m = tree.total_measure
        for _ in range(60):
            t = float(m * rng.random())
            p = normalize_point(tree, explore(tree, t))
            assert c.eval(t) == pytest.approx(p.height, abs=1e-9)
        assert c.eval(c.duration) == 0.0
