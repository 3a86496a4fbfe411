"""
Tests des k-solénoïdes à piégeage et du 2-solénoïde de T³
"""
import math

import numpy as np
import pytest

from models import AsymptoticEstimate, ExhaustionWindow
from modules.errors import ConstructionError, DomainError
from modules.ksolenoid import (TrappingSolenoid, constants_consistency, exhaustion_control_check,
                               exhaustion_schedule, k_schwartzman_class, random_window_audit,
                               slab_adjacency_is_path, slab_sum_class, t3_ruelle_sullivan_class,
                               t3_slab_class, t3_trapping_solenoid)
from modules.transversal import CircleRotation, PiecewiseConstantWeight

ALPHA = (math.sqrt(5.0) - 1.0) / 2.0
WRAP = (1.0 - ALPHA, 1.0)


@pytest.fixture(scope='module')
def t3():
    return t3_trapping_solenoid(ALPHA, wrap_cell=WRAP, samples=200)


def test_t3_slab_classes_by_intersection():
    assert t3_slab_class(ALPHA, 0.2, False).tolist() == [1, 0, 0]
    assert t3_slab_class(ALPHA, 0.9, True).tolist() == [1, 1, 0]


def test_t3_ruelle_sullivan_class(t3):
    plain, wrapped = math.hypot(1.0, ALPHA), math.hypot(1.0, ALPHA - 1.0)
    area = plain * (1.0 - ALPHA) + wrapped * ALPHA

    rs = t3_ruelle_sullivan_class(t3)

    assert rs.coords == pytest.approx(np.array([1.0, ALPHA, 0.0]) / area)


def test_declared_classes_must_match_geometry():
    wrong = PiecewiseConstantWeight.constant([1.0, 0.0, 0.0])
    with pytest.raises(ConstructionError):
        t3_trapping_solenoid(ALPHA, wrap_cell=WRAP, declared_phi=wrong, samples=200)


def test_trapping_solenoid_validates_epsilon():
    volume = PiecewiseConstantWeight.constant([1.0])
    with pytest.raises(DomainError):
        TrappingSolenoid(CircleRotation(ALPHA), volume, PiecewiseConstantWeight.constant([1.0, 0.0]), epsilon0=0.5)


def test_constants_are_consistent_with_sampled_slabs(t3):
    report = constants_consistency(t3, samples=500)

    assert report['success']
    assert report['c0'] == pytest.approx(math.hypot(1.0, ALPHA - 1.0))
    assert report['c2'] == pytest.approx(math.hypot(1.0, ALPHA))


def test_slab_sum_class_is_exact_integer_sum(t3):
    klass = slab_sum_class(t3, 0.3, -2, 3)

    assert klass.coords[0] == 5
    assert klass.coords[2] == 0
    with pytest.raises(DomainError):
        slab_sum_class(t3, 0.3, 1, 3)


def test_exhaustion_schedule_sizes():
    schedule = exhaustion_schedule(4096, 3)

    assert schedule == [ExhaustionWindow(-512, 512), ExhaustionWindow(-1024, 1024), ExhaustionWindow(-2048, 2048)]
    with pytest.raises(DomainError):
        exhaustion_schedule(4, 3)


def test_k_class_converges_to_ruelle_sullivan(t3):
    est = k_schwartzman_class(t3, 0.3, exhaustion_schedule(1 << 14, 3), tol=1e-2)

    assert isinstance(est, AsymptoticEstimate)
    assert est.value.distance(t3_ruelle_sullivan_class(t3)) < 1e-2


def test_closing_caps_do_not_change_the_limit(t3):
    schedule = exhaustion_schedule(1 << 14, 3)

    plain = k_schwartzman_class(t3, 0.3, schedule, tol=1e-2)
    capped = k_schwartzman_class(t3, 0.3, schedule, tol=1e-2, with_caps=True)

    assert isinstance(capped, AsymptoticEstimate)
    assert 0.0 < capped.value.distance(plain.value) < 1e-3
    assert np.all(np.linalg.norm(capped.window_values - plain.window_values, axis=1) < 1e-2)


def test_construction_records_checked_slabs(t3):
    assert t3.checked_slabs == 200
    assert t3.to_dict()['checked_slabs'] == 200


def test_k_class_requires_growing_windows(t3):
    with pytest.raises(DomainError):
        k_schwartzman_class(t3, 0.3, [ExhaustionWindow(-4, 4), ExhaustionWindow(-3, 3)])


def test_slab_adjacency_is_a_path(t3):
    assert slab_adjacency_is_path(t3, 0.3, -5, 5)


def test_exhaustion_control_holds_on_growing_balls(t3):
    report = exhaustion_control_check(t3, 0.3, [5.0, 10.0, 20.0, 40.0], fraction=0.5)

    assert report['success'], report['violations']
    ratios = [row['ratio'] for row in report['rows'] if 'ratio' in row]
    assert len(ratios) == 4
    assert ratios[-1] < ratios[0]


def test_random_window_audit_stays_under_bound(t3):
    audit = random_window_audit(t3, count=20, max_radius=30.0, seed=1)

    assert audit['success']
    assert audit['max_forward_excess'] < audit['bound']
    assert audit['max_backward_excess'] < audit['bound']
