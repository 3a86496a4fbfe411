"""
Tests des courbes relevées: flots linéaires, lacets, flots intégrés, reparamétrages
"""
import math

import numpy as np
import pytest

from modules.errors import ConstructionError, DomainError
from modules.trajectories import (BoundedDisplacement, CounterexampleSpec, OscillatorSpec, SpeedFunction,
                                  VectorField, arc_length_reparametrize, axes_oscillator_curve,
                                  constant_curve, counterexample_curve, counterexample_schedule,
                                  integrate_flow, linear_flow_curve, loop_curve, perturb_bounded,
                                  piecewise_linear_curve, reparametrize)


def test_linear_flow_rejects_zero_direction():
    with pytest.raises(DomainError):
        linear_flow_curve([0.0, 0.0])


def test_linear_flow_evaluates_lift():
    curve = linear_flow_curve([1.0, math.sqrt(2.0)], x0=[0.5, 0.25])

    assert curve(2.0) == pytest.approx([2.5, 0.25 + 2.0 * math.sqrt(2.0)])
    assert curve(np.array([0.0, 1.0])).shape == (2, 2)


def test_loop_curve_closes_after_one_period(flat2):
    curve = loop_curve(flat2, [2, 3])
    period = curve.metadata['period']

    assert period == pytest.approx(math.sqrt(13.0))
    assert curve(period) - curve(0.0) == pytest.approx([2.0, 3.0])


def test_constant_curve_does_not_move():
    curve = constant_curve([0.3, 0.7])

    assert np.array_equal(curve(np.array([-5.0, 5.0])), [[0.3, 0.7], [0.3, 0.7]])


def test_piecewise_curve_extends_linearly():
    curve = piecewise_linear_curve([0.0, 1.0, 2.0], [[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]])

    assert curve(1.5) == pytest.approx([1.0, 1.0])
    assert curve(3.0) == pytest.approx([1.0, 4.0])
    assert curve(-1.0) == pytest.approx([-1.0, 0.0])


def test_integrate_constant_field_matches_linear_flow():
    field = VectorField.from_descriptor(2, {'components': [[{'k': [0, 0], 'amp': 1.0}],
                                                           [{'k': [0, 0], 'amp': 0.5}]]})

    curve = integrate_flow(field, [0.1, 0.2], T=10.0, tol=1e-10)

    assert curve.domain == (-10.0, 10.0)
    assert curve(10.0) == pytest.approx([10.1, 5.2], abs=1e-8)
    assert curve(-4.0) == pytest.approx([-3.9, -1.8], abs=1e-8)
    with pytest.raises(DomainError):
        curve(11.0)


def test_integrate_flow_rejects_bad_parameters():
    field = VectorField.from_descriptor(2, {'profile': [{'k': [0, 0], 'amp': 1.0}], 'direction': [1, 0]})
    with pytest.raises(DomainError):
        integrate_flow(field, [0.0, 0.0], T=10.0, tol=0.0)


def test_arc_length_of_linear_flow_has_unit_speed(flat2):
    curve = arc_length_reparametrize(linear_flow_curve([3.0, 4.0]), flat2)

    assert np.linalg.norm(curve(1.0) - curve(0.0)) == pytest.approx(1.0)
    assert curve.metadata['dilation'] == pytest.approx(5.0)


def test_arc_length_of_piecewise_curve(flat2):
    curve = piecewise_linear_curve([-1.0, 0.0, 2.0], [[-2.0, 0.0], [0.0, 0.0], [0.0, 1.0]])

    unit = arc_length_reparametrize(curve, flat2)

    assert unit(0.0) == pytest.approx([0.0, 0.0])
    assert unit(1.0) == pytest.approx([0.0, 1.0])
    assert unit(-2.0) == pytest.approx([-2.0, 0.0])


def test_arc_length_rejects_stationary_segment(flat2):
    curve = piecewise_linear_curve([0.0, 1.0, 2.0], [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(DomainError):
        arc_length_reparametrize(curve, flat2)


def test_speed_schedule_must_increase():
    with pytest.raises(DomainError):
        SpeedFunction('schedule', knots=((0.0, 0.0), (1.0, 0.0)))
    with pytest.raises(DomainError):
        SpeedFunction('constant', factor=0.0)


def test_reparametrize_composes_with_speed():
    curve = linear_flow_curve([1.0, 0.0])
    faster = reparametrize(curve, SpeedFunction('constant', factor=2.0))
    scheduled = reparametrize(curve, SpeedFunction('schedule', knots=((0.0, 0.0), (1.0, 10.0))))

    assert faster(3.0) == pytest.approx([6.0, 0.0])
    assert scheduled(0.5) == pytest.approx([5.0, 0.0])
    assert scheduled(-1.0) == pytest.approx([-10.0, 0.0])
    assert scheduled.velocity_at(0.5) == pytest.approx([10.0, 0.0])


def test_counterexample_targets_and_schedule():
    spec = CounterexampleSpec()
    a, b = spec.targets()
    schedule = counterexample_schedule(spec)

    assert a[0] == pytest.approx([-1.0, -math.sqrt(2.0) - 1.0])
    assert b[9] == pytest.approx([10.0, 10.0 * math.sqrt(2.0) - 0.1])
    assert schedule.ray_starts[:2] == (1.0, 30.0)
    assert schedule.ray_ends[0] == 10.0
    assert schedule.pause_time == pytest.approx(100.0 * schedule.ray_ends[-1])


def test_counterexample_height_increases_along_curve():
    spec = CounterexampleSpec()
    curve = counterexample_curve(spec)
    P = curve.metadata['schedule'].pause_time
    times = np.concatenate([-np.geomspace(P, 1e-3, 2000), [0.0], np.geomspace(1e-3, P, 2000)])

    heights = spec.height(curve(times))

    assert np.all(np.diff(heights) > 0)


def test_counterexample_rejects_target_above_line():
    spec = CounterexampleSpec(targets_a=((-1.0, 0.0), (-2.0, -3.0)),
                              targets_b=((1.0, 1.0), (2.0, 2.0)))
    with pytest.raises(ConstructionError) as excinfo:
        counterexample_curve(spec)
    assert excinfo.value.epoch == 0


def test_axes_oscillator_alternates_axes():
    spec = OscillatorSpec(first_length=4.0, ratio=4.0)
    curve = axes_oscillator_curve(spec)

    assert spec.start_time(1) == pytest.approx(8.0)
    assert curve(4.0) == pytest.approx([4.0, 0.0])
    assert curve(8.0) == pytest.approx([0.0, 0.0], abs=1e-12)
    assert curve(24.0) == pytest.approx([0.0, 16.0])
    assert np.all(np.abs(curve(-np.linspace(0.0, 100.0, 50))) <= spec.corridor)


def test_perturbation_respects_declared_bound():
    curve = linear_flow_curve([1.0, 0.0])
    delta = BoundedDisplacement.from_terms(2, [{'amp': [0.3, 0.2], 'omega': 1.7}])

    perturbed = perturb_bounded(curve, delta, 0.5)
    times = np.linspace(-50.0, 50.0, 1001)

    assert np.all(np.linalg.norm(perturbed(times) - curve(times), axis=1) <= 0.5)
    with pytest.raises(DomainError):
        perturb_bounded(curve, delta, 0.1)
