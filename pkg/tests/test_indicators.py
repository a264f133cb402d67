"""Dominance, non-dominated filtering, reference points, and hypervolume."""

import numpy as np
import pytest

from diffmobo.errors import InvalidArgumentError, InvalidDataError, UnsupportedDimensionError
from diffmobo.indicators import (
    dominates,
    hypervolume,
    hypervolume_mc,
    nondominated_filter,
    reference_point,
)


class TestDominates:
    def test_clear_dominance(self):
        assert dominates([0, 0], [1, 1])

    def test_incomparable_both_ways(self):
        assert not dominates([1, 2], [2, 1])
        assert not dominates([2, 1], [1, 2])

    def test_equal_points(self):
        assert not dominates([1, 1], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            dominates([1, 2], [1, 2, 3])

    def test_antisymmetry_fuzz(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            p, q = rng.random(3), rng.random(3)
            assert not (dominates(p, q) and dominates(q, p))


class TestNondominatedFilter:
    def test_mutually_incomparable(self):
        idx = nondominated_filter(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert list(idx) == [0, 1]

    def test_dominated_dropped(self):
        idx = nondominated_filter(np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert list(idx) == [0]

    def test_four_point_case(self):
        Y = np.array([[0.0, 3.0], [1.0, 1.0], [3.0, 0.0], [2.0, 2.0]])
        assert list(nondominated_filter(Y)) == [0, 1, 2]

    def test_duplicates_retained(self):
        Y = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
        assert list(nondominated_filter(Y)) == [0, 1]

    def test_agrees_with_bruteforce(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            Y = rng.random((rng.integers(1, 20), 3))
            expected = [
                i
                for i in range(Y.shape[0])
                if not any(dominates(Y[j], Y[i]) for j in range(Y.shape[0]) if j != i)
            ]
            assert list(nondominated_filter(Y)) == expected


class TestReferencePoint:
    def test_componentwise_max(self):
        np.testing.assert_array_equal(
            reference_point(np.array([[1.0, 5.0], [3.0, 2.0]])), [3.0, 5.0]
        )

    def test_single_row(self):
        np.testing.assert_array_equal(reference_point(np.array([[2.0, 7.0]])), [2.0, 7.0])

    def test_empty_rejected(self):
        with pytest.raises(InvalidDataError):
            reference_point(np.empty((0, 2)))


class TestHypervolumeExact:
    def test_unit_box(self):
        assert hypervolume(np.array([[1.0, 1.0]]), np.array([2.0, 2.0])) == 1.0

    def test_two_point_union(self):
        s = np.array([[1.0, 2.0], [2.0, 1.0]])
        assert hypervolume(s, np.array([3.0, 3.0])) == 3.0

    def test_noncontributing_point(self):
        assert hypervolume(np.array([[4.0, 4.0]]), np.array([3.0, 3.0])) == 0.0

    def test_empty_set(self):
        assert hypervolume(np.empty((0, 2)), np.array([1.0, 1.0])) == 0.0

    def test_point_on_reference_boundary(self):
        # degenerate slab has measure zero but must not crash or contribute
        s = np.array([[1.0, 3.0], [2.0, 1.0]])
        assert hypervolume(s, np.array([3.0, 3.0])) == 2.0

    def test_3d_single_box(self):
        assert hypervolume(np.array([[1.0, 1.0, 1.0]]), np.array([2.0, 2.0, 2.0])) == 1.0

    def test_3d_union_by_hand(self):
        # boxes 4 and 2 overlapping in a unit cube: 4 + 2 - 1
        s = np.array([[0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        assert hypervolume(s, np.array([2.0, 2.0, 2.0])) == 5.0

    def test_unsupported_dimension(self):
        with pytest.raises(UnsupportedDimensionError):
            hypervolume(np.ones((1, 4)), np.full(4, 2.0))

    def test_dominated_points_contribute_nothing(self):
        rng = np.random.default_rng(21)
        for m in (2, 3):
            for _ in range(100):
                Y = rng.random((rng.integers(2, 15), m))
                r = np.full(m, 1.5)
                filtered = Y[nondominated_filter(Y)]
                assert hypervolume(Y, r) == pytest.approx(hypervolume(filtered, r), rel=1e-12)

    def test_monotone_under_insertion(self):
        rng = np.random.default_rng(22)
        for m in (2, 3):
            for _ in range(200):
                Y = rng.random((rng.integers(1, 12), m))
                r = np.full(m, 1.2)
                base = hypervolume(Y, r)
                extra = rng.random(m)
                assert hypervolume(np.vstack([Y, extra]), r) >= base - 1e-12


class TestHypervolumeMC:
    def test_unit_box_estimate(self):
        est, err = hypervolume_mc(np.array([[1.0, 1.0]]), np.array([2.0, 2.0]), 10**6, seed=0)
        assert est == pytest.approx(1.0, abs=0.005)

    def test_union_estimate(self):
        s = np.array([[1.0, 2.0], [2.0, 1.0]])
        est, err = hypervolume_mc(s, np.array([3.0, 3.0]), 10**6, seed=1)
        assert est == pytest.approx(3.0, abs=0.02)

    def test_empty(self):
        est, err = hypervolume_mc(np.empty((0, 2)), np.array([1.0, 1.0]), 1000, seed=0)
        assert est == 0.0 and err == 0.0

    def test_agrees_with_exact(self):
        rng = np.random.default_rng(7)
        for m in (2, 3):
            for trial in range(10):
                Y = rng.random((rng.integers(2, 20), m))
                r = np.full(m, 1.1)
                exact = hypervolume(Y, r)
                est, err = hypervolume_mc(Y, r, 200_000, seed=trial)
                assert abs(exact - est) <= max(4 * err, 1e-9)
