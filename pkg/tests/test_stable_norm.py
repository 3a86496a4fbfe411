"""
Tests des longueurs minimales de lacets et de la norme stable
"""
import math

import numpy as np
import pytest

from models import IntegralClass
from modules.errors import DomainError, ResolutionError
from modules.stable_norm import (LoopLengthSolver, minimal_loop_length, multiple_lengths, stable_norm,
                                 stable_norm_lower_bound, subadditivity_audit)


def test_flat_loop_length_is_exact(flat2):
    result = minimal_loop_length(flat2, IntegralClass([3, 4]))

    assert result.value == 5.0
    assert result.method == 'flat-exact'
    assert result.lower == result.upper == 5.0


def test_flat_stable_norm_equals_flat_norm(flat2):
    est = stable_norm(flat2, [3, 4], n_max=8)

    assert est.value == pytest.approx(5.0, abs=1e-12)
    assert est.running_min == [5.0] * 8
    assert est.C0 == pytest.approx(math.sqrt(2.0))
    assert est.upper_bounds[0] == pytest.approx(5.0 + math.sqrt(2.0))


def test_zero_class_has_zero_length(flat2, conformal2):
    assert minimal_loop_length(flat2, [0, 0]).value == 0.0
    assert minimal_loop_length(conformal2, [0, 0], resolution=4).value == 0.0


def test_invalid_inputs_are_rejected(flat2):
    with pytest.raises(DomainError):
        stable_norm(flat2, [1, 0], n_max=3)
    with pytest.raises(DomainError):
        minimal_loop_length(flat2, [0.5, 1.0])
    with pytest.raises(DomainError):
        minimal_loop_length(flat2, [1, 0, 0])
    with pytest.raises(ResolutionError):
        LoopLengthSolver(flat2, resolution=1)


def test_grid_solver_recovers_flat_lengths(flat2):
    solver = LoopLengthSolver(flat2, resolution=4, force_grid=True)

    assert solver.length([1, 0]).value == pytest.approx(1.0, abs=1e-9)
    assert solver.length([1, 1]).value == pytest.approx(math.sqrt(2.0), abs=1e-9)
    assert solver.length([1, 1]).method == 'grid-dijkstra'


def test_length_is_symmetric_under_negation(conformal2):
    solver = LoopLengthSolver(conformal2, resolution=4)

    forward = solver.length([1, 2])
    backward = solver.length([-1, -2])

    assert forward.value == backward.value
    assert np.array_equal(forward.polyline, backward.polyline[::-1])


def test_conformal_length_between_bounds(conformal2):
    result = minimal_loop_length(conformal2, [1, 0], resolution=8)
    valley = math.exp(-0.2) * sum((0.15 ** k / math.factorial(k)) ** 2 for k in range(12))

    assert result.lower == pytest.approx(stable_norm_lower_bound(conformal2, [1, 0]))
    assert result.lower <= result.value
    assert result.value <= valley + 0.03


def test_conformal_stable_norm_running_minimum(conformal2):
    est = stable_norm(conformal2, [1, 0], n_max=4, resolution=4, threads=2)

    assert len(est.lengths) == 4
    assert all(b <= a for a, b in zip(est.running_min, est.running_min[1:]))
    assert est.lower_bound <= est.value <= est.lengths[0]
    assert all(u >= est.value for u in est.upper_bounds)


def test_subadditivity_holds_up_to_grid_slack(conformal2):
    report = subadditivity_audit(conformal2, [([1, 0], [0, 1]), ([1, 1], [1, -1])], resolution=4,
                                 multiples=[([1, 0], 2)])

    assert report['success'], report['violations']
    assert report['checked'] == 3
    assert report['slack'] > 0.0


def test_flat_multiples_are_exactly_additive(flat2):
    rows = multiple_lengths(flat2, [3, 4], n_max=4)

    assert [row['l_multiple'] for row in rows] == [5.0, 10.0, 15.0, 20.0]
    assert not any(row['strict'] for row in rows)
