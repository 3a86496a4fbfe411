"""
Tests des classes asymptotiques: voies de calcul, limites unilatérales, amas et cônes
"""
import math

import numpy as np
import pytest

from config import get_config
from models import AsymptoticEstimate, NotConvergent, WindowGrid, WindowSchedule
from modules.asymptotic_cycles import (ROUTES, Hypersurface, OneForm, balanced_cluster_check,
                                       closing_independence, cluster_scan, form_integral, route_agreement,
                                       route_estimate, schwartzman_class, signed_crossings,
                                       unparametrized_cluster, window_class)
from modules.errors import DomainError, StructuralError, TransversalityError
from modules.torus_geometry import TrigPolynomial
from modules.trajectories import (CounterexampleSpec, LiftedCurve, OscillatorSpec, SpeedFunction,
                                  axes_oscillator_curve, constant_curve, counterexample_curve,
                                  linear_flow_curve, loop_curve)

SQRT2 = math.sqrt(2.0)


def _cubic_crossing_curve():
    """y = 1/2 + t³: traversée tangente de {y = 1/2} en t = 0"""
    return LiftedCurve(
        kind='analytic',
        dim=2,
        evaluator=lambda t: np.column_stack([t, 0.5 + t ** 3]),
        velocity=lambda t: np.column_stack([np.ones_like(t), 3.0 * t ** 2]),
    )


@pytest.mark.parametrize('route', ROUTES)
def test_every_route_recovers_linear_flow_direction(flat2, route):
    curve = linear_flow_curve([1.0, SQRT2], x0=[0.1234, 0.4321])

    est = route_estimate(curve, flat2, route, WindowSchedule.geometric(1000.0, 6), tol=1e-2)

    assert est.converged
    assert est.value.coords == pytest.approx([1.0, SQRT2], abs=5e-3)


def test_routes_agree_on_linear_flow(flat2):
    curve = linear_flow_curve([1.0, SQRT2], x0=[0.1234, 0.4321])
    schedule = WindowSchedule.geometric(1000.0, 6)

    estimates = {route: route_estimate(curve, flat2, route, schedule, tol=1e-2) for route in ROUTES}

    assert route_agreement(estimates) < 5e-3


def test_route_estimate_is_deterministic_across_threads(flat2):
    curve = linear_flow_curve([1.0, SQRT2], x0=[0.1234, 0.4321])
    schedule = WindowSchedule.geometric(500.0, 5)

    first = route_estimate(curve, flat2, 'form', schedule, tol=1e-2, threads=1)
    second = route_estimate(curve, flat2, 'form', schedule, tol=1e-2, threads=4)

    assert np.array_equal(first.window_values, second.window_values)


def test_route_estimate_rejects_unknown_route_and_dimension(flat2, flat3):
    curve = linear_flow_curve([1.0, 0.0])
    with pytest.raises(DomainError):
        route_estimate(curve, flat2, 'spiral', WindowSchedule.geometric(10.0, 3))
    with pytest.raises(StructuralError):
        route_estimate(curve, flat3, 'loop', WindowSchedule.geometric(10.0, 3))


def test_loop_class_is_exact_at_period_multiples(flat2):
    curve = loop_curve(flat2, [2, 3])
    period = curve.metadata['period']
    schedule = WindowSchedule.geometric(64.0 * period, 4)

    est = schwartzman_class(curve, flat2, 1e-9, schedule)

    assert isinstance(est, AsymptoticEstimate)
    assert est.value.coords == pytest.approx(np.array([2.0, 3.0]) / math.sqrt(13.0), abs=1e-9)
    assert est.positive.distance(est.negative) <= 1e-9


def test_window_class_requires_ordered_window(flat2):
    curve = linear_flow_curve([1.0, 0.0])

    assert window_class(curve, flat2, 0.0, 3.0).coords.tolist() == [3, 0]
    with pytest.raises(DomainError):
        window_class(curve, flat2, 3.0, 3.0)


def test_constant_curve_has_zero_class(flat2):
    est = schwartzman_class(constant_curve([0.3, 0.3]), flat2, 1e-9, WindowSchedule.geometric(100.0, 4))

    assert est.converged
    assert est.value.norm() == 0.0


def test_oscillator_has_no_class_and_two_rays(flat2):
    curve = axes_oscillator_curve(OscillatorSpec())

    result = schwartzman_class(curve, flat2, 1e-3, WindowSchedule.geometric(4096.0, 6))

    assert isinstance(result, NotConvergent)
    assert result.cone.ray_count == 2
    assert np.allclose(np.abs(result.cone.rays), np.eye(2), atol=1e-12) or \
        np.allclose(np.abs(result.cone.rays[::-1]), np.eye(2), atol=1e-12)


def test_signed_crossings_counts_with_orientation():
    curve = linear_flow_curve([0.0, 1.0], x0=[0.2, 0.0])

    up = signed_crossings(curve, Hypersurface(np.array([0.0, 1.0])), 0.0, 10.0)
    down = signed_crossings(curve, Hypersurface(np.array([0.0, 1.0]), orientation=-1), 0.0, 10.0)

    assert up == 10
    assert down == -10


def test_tangent_crossing_raises_transversality_error():
    with pytest.raises(TransversalityError) as excinfo:
        signed_crossings(_cubic_crossing_curve(), Hypersurface(np.array([0.0, 1.0])), -1.0, 1.0)
    # la dichotomie ne place la tangence d'une cubique qu'à ∛ε près
    assert abs(excinfo.value.crossing_time) < 1e-4
    assert abs(excinfo.value.normal_speed) < get_config().TRANSVERSALITY_TOL


def test_tangent_window_is_rejected_not_fatal(flat2):
    schedule = WindowSchedule.explicit([(0.1, 1.1), (-1.0, 2.0), (0.2, 4.2)])

    est = route_estimate(_cubic_crossing_curve(), flat2, 'cross', schedule, tol=10.0)

    assert len(est.rejected) == 1
    assert est.windows == ((0.1, 1.1), (0.2, 4.2))


def test_exact_form_integral_vanishes_asymptotically():
    potential = TrigPolynomial.from_terms(2, [{'k': [1, 0], 'amp': 0.3}, {'k': [1, 1], 'amp': 0.2}])
    exact = OneForm(np.zeros(2), potential)
    curve = linear_flow_curve([1.0, SQRT2], x0=[0.1, 0.2])

    for T in (10.0, 100.0, 1000.0):
        average = form_integral(curve, exact, -T, T) / (2.0 * T)
        # ∫dφ = φ(fin) - φ(début), borné par 2·sup|φ| (plus l'erreur de quadrature)
        assert abs(average) <= (2.0 * potential.bound() + 0.01) / (2.0 * T)
    assert abs(average) < 1e-3


def test_hypersurface_normal_must_be_primitive():
    with pytest.raises(DomainError):
        Hypersurface(np.array([2.0, 4.0]))


def test_closing_independence_difference_is_bounded(flat2):
    curve = linear_flow_curve([1.0, SQRT2], x0=[0.9, 0.95])

    report = closing_independence(curve, flat2, WindowSchedule.independent(50.0, 100.0, 8))

    assert report['bounded']
    assert report['normalized_differences'][-1] <= report['C'] / report['spans'][-1] + 1e-15


def test_cluster_scan_requires_three_decades(flat2):
    curve = linear_flow_curve([1.0, SQRT2])
    with pytest.raises(DomainError):
        cluster_scan(curve, flat2, WindowGrid.geometric(10.0, 10.0, 5))


def test_linear_flow_cluster_is_balanced(flat2):
    curve = linear_flow_curve([1.0, SQRT2], x0=[0.1234, 0.4321])

    est = cluster_scan(curve, flat2, WindowGrid.geometric(10.0, 10.0, 12), tol=1e-2)
    report = balanced_cluster_check(est, tol=0.1)

    assert len(est.full) == 144
    assert report['success']
    assert np.all(est.positive_stable) and np.all(est.negative_stable)


def test_counterexample_balanced_sample_at_deepest_epoch(flat2):
    curve = counterexample_curve(CounterexampleSpec())
    R = curve.metadata['schedule'].ray_ends[-1]

    sample = window_class(curve, flat2, -R, R).coords / (2.0 * R)

    assert sample == pytest.approx([0.0, -0.1], abs=1e-6)


def test_unparametrized_cluster_of_linear_flow_is_one_ray(flat2):
    curve = linear_flow_curve([1.0, SQRT2], x0=[0.1234, 0.4321])
    speeds = [SpeedFunction('constant', factor=1.0), SpeedFunction('constant', factor=3.0)]

    _, cone = unparametrized_cluster(curve, flat2, speeds, WindowGrid.geometric(10.0, 10.0, 11))

    assert cone.ray_count == 1
    assert cone.rays[0] == pytest.approx(np.array([1.0, SQRT2]) / math.sqrt(3.0), abs=0.05)
