"""
Tests des objets valeur (classes, nuages, calendriers, rapports)
"""
import json
import math

import numpy as np
import pytest

from models import (ExhaustionWindow, HomologyVector, IntegralClass, PointSet, Report,
                    WindowGrid, WindowSchedule)
from modules.errors import DomainError, StructuralError


def test_homology_vector_rejects_non_finite_coordinates():
    with pytest.raises(DomainError):
        HomologyVector(np.array([1.0, math.nan]))


def test_homology_vector_distance_requires_same_rank():
    with pytest.raises(StructuralError):
        HomologyVector([1.0, 0.0]).distance(HomologyVector([1.0, 0.0, 0.0]))


def test_homology_vector_is_immutable():
    v = HomologyVector([1.0, 2.0])
    with pytest.raises(ValueError):
        v.coords[0] = 5.0


def test_integral_class_accepts_integral_floats_only():
    assert IntegralClass(np.array([2.0, -3.0])) == IntegralClass([2, -3])
    with pytest.raises(DomainError):
        IntegralClass(np.array([1.5, 0.0]))


def test_integral_class_embeds_losslessly():
    klass = IntegralClass([2, 3])
    assert klass.to_vector() == HomologyVector([2.0, 3.0])
    assert not klass.is_zero()
    assert IntegralClass([0, 0]).is_zero()


def test_point_set_duplicates_are_reported_not_removed():
    S = PointSet(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    assert len(S) == 3
    assert S.duplicate_mask().tolist() == [False, False, True]
    assert S.to_dict()['duplicates'] == 1


def test_point_set_union_rejects_mixed_ranks():
    with pytest.raises(StructuralError):
        PointSet(np.zeros((1, 2))).union(PointSet(np.zeros((1, 3))))


def test_point_set_csv_keeps_provenance(tmp_path):
    S = PointSet(np.array([[0.1, 0.2], [1.0 / 3.0, -2.5]]), np.array([[-1.0, 2.0], [-4.0, 8.0]]))
    path = tmp_path / 'cluster.csv'
    S.to_csv(str(path))

    loaded = PointSet.from_csv(str(path))

    assert np.array_equal(loaded.points, S.points)
    assert np.array_equal(loaded.provenance, S.provenance)
    assert path.read_text(encoding='utf-8').splitlines()[0] == 'coord_0,coord_1,s,t'


def test_window_schedule_spans_must_increase_strictly():
    with pytest.raises(DomainError):
        WindowSchedule.explicit([(-1.0, 1.0), (-0.5, 1.5)])
    with pytest.raises(DomainError):
        WindowSchedule.explicit([(1.0, 1.0)])


def test_geometric_schedule_ends_at_max_span():
    schedule = WindowSchedule.geometric(1e4, 6)

    assert schedule.spans[-1] == pytest.approx(1e4)
    assert np.allclose(schedule.spans[1:] / schedule.spans[:-1], 2.0)
    assert np.all(schedule.positive_side().starts == 0.0)
    assert np.all(schedule.negative_side().ends == 0.0)


def test_independent_schedule_keeps_its_rule():
    schedule = WindowSchedule.independent(10.0, 40.0, 3)

    assert schedule.rule == 'independent'
    assert schedule.windows == ((-10.0, 40.0), (-20.0, 80.0), (-40.0, 160.0))
    assert schedule.to_dict()['rule'] == 'independent'


def test_window_grid_requires_negative_starts_and_positive_ends():
    with pytest.raises(DomainError):
        WindowGrid((1.0,), (2.0,))
    grid = WindowGrid.geometric(10.0, 10.0, 11, ratio=2.0)
    decades_s, decades_t = grid.decades()
    assert decades_s == pytest.approx(10 * math.log10(2.0))
    assert decades_t == pytest.approx(decades_s)


def test_exhaustion_window_requires_a_nonpositive_and_b_positive():
    assert ExhaustionWindow(-3, 4).size == 7
    with pytest.raises(DomainError):
        ExhaustionWindow(1, 4)


def test_report_json_is_sorted_and_serializes_numpy():
    report = Report(config={'subcommand': 'stablenorm'},
                    results={'value': np.float64(5.0), 'lengths': np.array([5.0, 10.0])},
                    assertions=[], exit_code=0)

    payload = json.loads(report.to_json())

    assert list(payload) == sorted(payload)
    assert payload['results']['lengths'] == [5.0, 10.0]
    assert report.success
