"""
Tests des solénoïdes mesurés: Ruelle-Sullivan, feuilles, mesures empiriques, croissance contrôlée
"""
import math

import numpy as np
import pytest

from models import AsymptoticEstimate
from modules.errors import DomainError
from modules.solenoid import (SuspensionSolenoid, cluster_inclusion_check, controlled_growth_ratio,
                              empirical_transversal_measure, leaf_schwartzman_class, measured_class_report,
                              realize_as_torus_flow, ruelle_sullivan_class, ruelle_sullivan_map,
                              solenoid_cluster)
from modules.transversal import AtomicMeasure, CircleRotation, FiniteSystem, PiecewiseConstantWeight

ALPHA = (math.sqrt(5.0) - 1.0) / 2.0


def _finite_solenoid():
    phi = PiecewiseConstantWeight.from_descriptor([{'cell': [0.0, 0.4], 'class': [1, 0]}], [0, 1])
    return SuspensionSolenoid(FiniteSystem([1, 0, 3, 4, 2]), PiecewiseConstantWeight.constant([1.0]), phi)


def _cycle_measures():
    return [AtomicMeasure(np.array([0.1, 0.3]), np.array([0.5, 0.5])),
            AtomicMeasure(np.array([0.5, 0.7, 0.9]), np.full(3, 1.0 / 3.0))]


def test_ruelle_sullivan_class_of_linear_flow():
    _, sol = realize_as_torus_flow(ALPHA)
    _, arc = realize_as_torus_flow(ALPHA, 'arclength')

    assert ruelle_sullivan_class(sol).coords == pytest.approx([1.0, ALPHA])
    assert ruelle_sullivan_class(arc).coords == pytest.approx(np.array([1.0, ALPHA]) / math.hypot(1.0, ALPHA))


def test_ruelle_sullivan_map_is_linear_and_class_is_normalized():
    sol = _finite_solenoid()
    mu = _cycle_measures()[1]

    assert ruelle_sullivan_map(sol, mu.scaled(2.0)).coords == pytest.approx(2.0 * ruelle_sullivan_map(sol, mu).coords)
    assert ruelle_sullivan_class(sol, mu.scaled(2.0)).coords == pytest.approx([0.0, 1.0])
    assert ruelle_sullivan_class(sol).coords == pytest.approx([0.4, 0.6])


def test_solenoid_rejects_non_integral_weights_and_bad_roof():
    phi = PiecewiseConstantWeight.constant([0.5, 1.0])
    with pytest.raises(DomainError):
        SuspensionSolenoid(CircleRotation(ALPHA), PiecewiseConstantWeight.constant([1.0]), phi)
    with pytest.raises(DomainError):
        SuspensionSolenoid(CircleRotation(ALPHA), PiecewiseConstantWeight.constant([0.0]),
                           PiecewiseConstantWeight.constant([1.0, 0.0]))


def test_leaf_class_matches_ruelle_sullivan_for_golden_rotation():
    _, sol = realize_as_torus_flow(ALPHA)

    leaf = leaf_schwartzman_class(sol, 0.3, 20000, tol=1e-2)

    assert isinstance(leaf, AsymptoticEstimate)
    assert leaf.value.distance(ruelle_sullivan_class(sol)) < 1e-3
    assert leaf.cross_checks['loop'].converged
    assert leaf.cross_checks['loop'].value.distance(leaf.value) < 1e-3


def test_leaf_class_cross_checks_crossing_route():
    _, sol = realize_as_torus_flow(ALPHA)

    leaf = leaf_schwartzman_class(sol, 0.3, 2000, tol=1e-2, routes=('loop', 'cross'))

    assert set(leaf.cross_checks) == {'loop', 'cross'}
    assert leaf.cross_checks['cross'].windows == leaf.windows
    assert leaf.cross_checks['cross'].value.distance(leaf.value) < 5e-3


def test_leaf_class_needs_enough_returns():
    _, sol = realize_as_torus_flow(ALPHA)
    with pytest.raises(DomainError):
        leaf_schwartzman_class(sol, 0.3, 4)


def test_measured_class_report_over_seeds():
    _, sol = realize_as_torus_flow(ALPHA)

    report = measured_class_report(sol, [0.0, 0.25, 0.5, 0.75], 20000, tol=1e-2, threads=2)

    assert report.max_deviation < 1e-3
    assert report.normalization == pytest.approx(1.0)
    assert len(report.leaf_classes) == 4


def test_empirical_measure_approaches_roof_weighted_measure():
    _, sol = realize_as_torus_flow(ALPHA)

    measure, distance = empirical_transversal_measure(sol, 0.1, 10000)

    assert measure.mass == pytest.approx(1.0)
    assert distance < 1e-2


def test_controlled_growth_ratio_decreases():
    _, sol = realize_as_torus_flow(ALPHA)

    rows = controlled_growth_ratio(sol, 0.2, [10.0, 100.0, 1000.0])

    assert rows[0]['ratio'] == pytest.approx(2.0 / 19.0)
    assert [row['ratio'] for row in rows] == sorted((row['ratio'] for row in rows), reverse=True)
    assert rows[-1]['ratio'] < 0.01


def test_controlled_growth_ratio_of_compact_leaf_vanishes():
    rows = controlled_growth_ratio(_finite_solenoid(), 0.5, [1.0, 5.0])

    assert rows[-1]['ratio'] == 0.0
    with pytest.raises(DomainError):
        controlled_growth_ratio(_finite_solenoid(), 0.5, [5.0, 1.0])


def test_finite_leaves_lie_in_hull_of_invariant_measures():
    report = cluster_inclusion_check(_finite_solenoid(), [0.1, 0.5], 60, _cycle_measures(), tol=1e-9)

    assert report['success']
    assert sorted(report['targets']) == [[0.0, 1.0], [1.0, 0.0]]


def test_solenoid_cluster_rejects_windows_outside_orbit():
    with pytest.raises(DomainError):
        solenoid_cluster(_finite_solenoid(), [0.1], 10, [20])
