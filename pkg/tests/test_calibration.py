"""
Tests des fonctions calibrantes et des classes de lacets
"""
import numpy as np
import pytest

from models import IntegralClass
from modules.calibration import (calibrator_difference_bound, curve_increment, equivariance_residual,
                                 identity_calibrator, lipschitz_constant, loop_class,
                                 partition_calibrator)
from modules.errors import ConstructionError, DomainError
from modules.torus_geometry import path_length
from modules.trajectories import linear_flow_curve, loop_curve


@pytest.mark.parametrize('n', [1, 2, 3])
def test_partition_calibrator_is_equivariant(n):
    phi = partition_calibrator(n, bump='cosine', radius=0.75)

    assert equivariance_residual(phi, count=500, seed=n) < 1e-12
    assert np.all(phi(np.zeros((1, n))) == 0.0)


def test_tent_partition_with_unit_radius_is_identity():
    phi = partition_calibrator(2, bump='tent', radius=1.0)

    assert calibrator_difference_bound(phi, identity_calibrator(2)) < 1e-12


def test_partition_differs_from_identity_by_bounded_amount():
    phi = partition_calibrator(2, bump='cosine', radius=0.75)

    bound = calibrator_difference_bound(phi, identity_calibrator(2))

    assert 0.0 < bound < 2.0


@pytest.mark.parametrize('radius', [0.5, 1.2])
def test_partition_radius_outside_cover_range_is_rejected(radius):
    with pytest.raises(ConstructionError):
        partition_calibrator(2, radius=radius)


def test_lipschitz_constant_of_identity(flat2):
    assert lipschitz_constant(identity_calibrator(2), flat2) == pytest.approx(1.1, rel=1e-6)


def test_partition_calibrator_is_lipschitz_on_random_polylines(flat2):
    phi = partition_calibrator(2, bump='cosine', radius=0.8)
    constant = lipschitz_constant(phi, flat2)
    rng = np.random.default_rng(7)

    worst = 0.0
    for _ in range(200):
        start = rng.uniform(-3.0, 3.0, 2)
        polyline = np.vstack([start, start + np.cumsum(rng.normal(0.0, 0.3, (4, 2)), axis=0)])
        values = phi(polyline[[0, -1]])
        worst = max(worst, float(np.linalg.norm(values[1] - values[0])) / path_length(flat2, polyline))

    assert worst <= constant


def test_curve_increment_does_not_depend_on_lift():
    phi = partition_calibrator(2, bump='cosine', radius=0.75)
    curve = linear_flow_curve([1.0, 0.5], x0=[0.2, 0.3])

    first = curve_increment(phi, curve, -3.0, 7.0, verify_lift=True)
    second = curve_increment(phi, curve, -3.0, 7.0)

    assert first == second
    with pytest.raises(DomainError):
        curve_increment(phi, curve, 2.0, 1.0)


@pytest.mark.parametrize('klass', [(2, 3), (-1, 4), (0, 1)])
def test_loop_class_recovers_class(flat2, klass):
    curve = loop_curve(flat2, klass, x0=[0.3, 0.6])
    period = curve.metadata['period']
    samples = curve(np.linspace(0.0, period, 64))

    for phi in (identity_calibrator(2), partition_calibrator(2, bump='cosine', radius=0.8)):
        assert loop_class(phi, samples) == IntegralClass(list(klass))


def test_loop_class_rejects_open_path():
    with pytest.raises(DomainError):
        loop_class(identity_calibrator(2), np.array([[0.0, 0.0], [0.5, 0.0]]))


def test_loop_class_tolerates_closure_rounding():
    samples = np.array([[0.0, 0.0], [1.0 + 5e-10, 0.0]])

    assert loop_class(identity_calibrator(2), samples) == IntegralClass([1, 0])
