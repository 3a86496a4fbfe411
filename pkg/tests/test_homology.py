"""
Tests de l'arithmétique des classes, des enveloppes et des cônes
"""
import math

import numpy as np
import pytest

from models import HomologyVector, PointSet
from modules.errors import DomainError, StructuralError
from modules.homology import (additive_hull_sample, angular_distance, combine, cone_from_samples,
                              hull_membership, segment_distance)


def _points(*rows):
    return PointSet(np.array(rows, dtype=float))


def test_combine_is_independent_of_term_order():
    big, unit = HomologyVector([1.0, 0.0]), HomologyVector([0.0, 1.0])
    terms = [(1e16, big), (1.0, unit), (1.0, big), (-1e16, big)]

    first = combine(terms)
    second = combine(terms[::-1])

    assert first == second
    assert first.coords.tolist() == [1.0, 1.0]


def test_combine_rejects_mixed_ranks():
    with pytest.raises(StructuralError):
        combine([(1.0, HomologyVector([1.0])), (1.0, HomologyVector([1.0, 0.0]))])
    with pytest.raises(DomainError):
        combine([])


def test_additive_hull_sample_contains_both_sets_exactly():
    A = _points([0.0, 0.0])
    B = _points([1.0, 0.0], [0.0, 1.0])

    S = additive_hull_sample(A, B, 3)

    rows = {tuple(p) for p in S.points}
    assert rows == {(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (0.0, 0.5), (0.0, 1.0)}
    assert not S.has_duplicates


def test_additive_hull_sample_rejects_empty_input():
    with pytest.raises(DomainError):
        additive_hull_sample(PointSet.empty(2), _points([1.0, 0.0]), 4)


def test_segment_distance_reports_closest_segment():
    A = _points([0.0, 0.0], [5.0, 5.0])
    B = _points([2.0, 0.0])

    dist, i, j, tau = segment_distance(HomologyVector([1.0, 1.0]), A, B)

    assert dist == pytest.approx(1.0)
    assert (i, j) == (0, 0)
    assert tau == pytest.approx(0.5)


def test_hull_membership_square():
    S = _points([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0])

    inside, d_in = hull_membership(HomologyVector([0.5, 0.5]), S, 1e-12)
    outside, d_out = hull_membership(HomologyVector([2.0, 0.5]), S, 1e-12)

    assert inside and d_in == 0.0
    assert not outside
    assert d_out == pytest.approx(1.0)


def test_hull_membership_degenerate_segment():
    S = _points([0.0, 0.0], [2.0, 0.0])

    on, _ = hull_membership(HomologyVector([1.0, 0.0]), S, 1e-12)
    off, distance = hull_membership(HomologyVector([3.0, 4.0]), S, 1e-12)

    assert on
    assert not off
    assert distance == pytest.approx(math.hypot(1.0, 4.0))


def test_hull_membership_rank_four_uses_iterative_distance():
    S = PointSet(np.vstack([np.zeros(4), np.eye(4)]))

    inside, d_in = hull_membership(HomologyVector(np.full(4, 0.1)), S, 1e-6)
    outside, d_out = hull_membership(HomologyVector(np.ones(4)), S, 1e-6)

    assert inside and d_in < 1e-6
    assert not outside
    assert d_out == pytest.approx(1.5, abs=1e-6)


def test_cone_groups_directions_and_counts_zeros():
    S = _points([1.0, 0.0], [2.0, 0.0], [0.0, 3.0], [0.0, 0.0])

    cone = cone_from_samples(S, angular_tol=0.05)

    assert cone.ray_count == 2
    assert cone.counts == (2, 1)
    assert cone.zero_count == 1
    assert np.allclose(cone.rays, [[1.0, 0.0], [0.0, 1.0]])


def test_cone_is_invariant_under_positive_scaling():
    rng = np.random.default_rng(3)
    S = PointSet(rng.normal(size=(40, 3)))

    first = cone_from_samples(S, angular_tol=0.3)
    second = cone_from_samples(PointSet(7.5 * S.points), angular_tol=0.3)

    assert first.counts == second.counts
    assert np.allclose(first.rays, second.rays)


def test_cone_of_all_zero_cloud_is_degenerate():
    cone = cone_from_samples(PointSet(np.zeros((3, 2))), angular_tol=0.1)

    assert cone.ray_count == 0
    assert cone.zero_flag


def test_angular_distance_of_orthogonal_directions():
    assert angular_distance(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(math.pi / 2)
