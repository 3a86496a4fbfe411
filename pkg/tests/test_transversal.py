"""
Tests des bases transverses, des poids et des moyennes de Birkhoff
"""
import math

import numpy as np
import pytest

from modules.errors import DomainError
from modules.transversal import (AtomicMeasure, CircleRotation, FiniteSystem, IntervalExchange, Odometer,
                                 PiecewiseConstantWeight, TrigWeight, birkhoff_average, invariance_defect,
                                 roof_from_descriptor, system_from_descriptor)

GOLDEN_FRACTION = (math.sqrt(5.0) - 1.0) / 2.0


def _h(x):
    return np.cos(2.0 * np.pi * x) + np.sin(4.0 * np.pi * x)


def test_rotation_orbit_and_backward_orbit():
    R = CircleRotation(GOLDEN_FRACTION)

    forward = R.orbit(0.1, 3)
    back = R.backward_orbit(forward[-1], 2)

    assert forward == pytest.approx([0.1, (0.1 + GOLDEN_FRACTION) % 1.0, (0.1 + 2 * GOLDEN_FRACTION) % 1.0])
    assert back == pytest.approx(forward[1::-1])
    assert R.ergodic


def test_rational_rotation_is_not_uniquely_ergodic():
    R = CircleRotation(0.25)

    assert not R.uniquely_ergodic
    assert R.near_rational(10 ** 6) == 0.25


def test_interval_exchange_moves_intervals():
    T = IntervalExchange([0.5, 0.3, 0.2], [2, 1, 0])

    assert T.orbit(0.1, 2) == pytest.approx([0.1, 0.6])
    assert T.backward_orbit(0.6, 1)[0] == pytest.approx(0.1)
    with pytest.raises(DomainError):
        IntervalExchange([0.5, 0.5], [0, 0])


def test_odometer_adds_one_with_carry():
    O = Odometer(depth=16)
    state = O.seed_state(0.5)

    assert state == 1
    assert O.coordinates(O.orbit(state, 3)).tolist() == [0.5, 0.25, 0.75]
    assert O.apply(np.array([0.5]))[0] == 0.25
    assert O.interval_measure(0.0, 0.5) == 0.5


def test_finite_system_cycles_and_seeds():
    F = FiniteSystem([1, 0, 3, 4, 2])

    assert F.cycles == [[0, 1], [2, 3, 4]]
    assert not F.ergodic and not F.uniquely_ergodic
    assert F.period(3) == 3
    assert F.seed_state(0.5) == 2
    assert F.seed_state(7) == 2
    assert F.coordinates(F.orbit(0, 3)).tolist() == [0.1, 0.3, 0.1]


def test_finite_system_weights_must_be_invariant():
    with pytest.raises(DomainError):
        FiniteSystem([1, 0, 2], weights=[1.0, 2.0, 1.0])


def test_system_from_descriptor_dispatches_on_type():
    assert isinstance(system_from_descriptor({'type': 'rotation', 'alpha': 0.3}), CircleRotation)
    assert isinstance(system_from_descriptor({'type': 'odometer', 'depth': 8}), Odometer)
    with pytest.raises(DomainError):
        system_from_descriptor({'type': 'shift'})


def test_piecewise_weight_integral_uses_cell_measures():
    w = PiecewiseConstantWeight.from_descriptor([{'cell': [0.0, 0.5], 'class': [2.0]}], [1.0])

    assert w.integral(CircleRotation(GOLDEN_FRACTION))[0] == pytest.approx(1.5)
    assert w(np.array([0.25, 0.75]))[:, 0].tolist() == [2.0, 1.0]
    assert w.is_integral


def test_piecewise_weight_cells_must_be_disjoint():
    with pytest.raises(DomainError):
        PiecewiseConstantWeight.from_descriptor(
            [{'cell': [0.0, 0.6], 'class': [1.0]}, {'cell': [0.5, 1.0], 'class': [2.0]}], [0.0])


def test_trig_roof_integral_is_exact():
    roof = roof_from_descriptor({'trig': [{'k': [0], 'amp': 2.0}, {'k': [1], 'amp': 0.5}]})

    assert isinstance(roof, TrigWeight)
    assert roof.integral(CircleRotation(0.3))[0] == pytest.approx(2.0)
    lo, hi = roof.bounds()
    assert lo == pytest.approx(1.5, abs=1e-5)
    assert hi == pytest.approx(2.5, abs=1e-5)


def test_atomic_measure_validation_and_integration():
    mu = AtomicMeasure(np.array([0.25, 0.75]), np.array([1.0, 3.0]))

    assert mu.mass == 4.0
    assert mu.interval_measure(0.5, 1.0) == 3.0
    assert mu.integrate(lambda x: np.column_stack([x]))[0] == pytest.approx(2.5)
    with pytest.raises(DomainError):
        AtomicMeasure(np.array([0.1]), np.array([-1.0]))


def test_birkhoff_average_of_constant_is_exact():
    result = birkhoff_average(CircleRotation(GOLDEN_FRACTION), PiecewiseConstantWeight.constant([1.0]), 0.2, 1000)

    assert result.value.tolist() == [1.0]
    assert result.tail == 0.0


def test_birkhoff_average_equidistributes_for_golden_rotation():
    weight = TrigWeight.from_terms([{'k': [1], 'amp': 1.0}])

    result = birkhoff_average(CircleRotation(GOLDEN_FRACTION), weight, 0.2, 10000)

    assert abs(result.value[0]) < 1e-3
    with pytest.raises(DomainError):
        birkhoff_average(CircleRotation(GOLDEN_FRACTION), weight, 0.2, 0)


@pytest.mark.parametrize('system', [
    CircleRotation(GOLDEN_FRACTION),
    IntervalExchange([0.5, 0.3, 0.2], [2, 1, 0]),
    Odometer(depth=16),
    FiniteSystem([1, 0, 3, 4, 2]),
])
def test_measures_are_invariant(system):
    assert invariance_defect(system, _h) < 1e-3


def test_invariance_defect_detects_non_invariant_map():
    class Collapse(CircleRotation):
        def apply(self, coords):
            return np.zeros_like(coords)

    assert invariance_defect(Collapse(0.1), _h) == pytest.approx(1.0, abs=1e-9)
    assert math.isfinite(invariance_defect(CircleRotation(0.1), _h))
