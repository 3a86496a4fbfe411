"""
Tests du lanceur d'expériences: validation, codes de sortie, rapports, suite de référence
"""
import json
import math
import os

import pytest

from modules.errors import ConfigValidationError
from modules.experiment_runner import (REPORT_FILE, SUBCOMMANDS, ExperimentRunner, list_golden, resolve_constants,
                                       run_all, validate_config)

GOLDEN_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs', 'golden')


def _linear_config(**extra):
    raw = {'schemaVersion': 1, 'subcommand': 'asymptotic', 'seed': 0,
           'curve': {'type': 'linear', 'velocity': [1, 'sqrt2']}}
    raw.update(extra)
    return raw


def _without_wall_time(path):
    with open(path, encoding='utf-8') as f:
        data = json.load(f)
    data.pop('wall_time')
    return data


def test_resolve_constants_handles_nested_values():
    resolved = resolve_constants({'v': ['golden', '-sqrt2', 3], 'name': 'flow'})

    assert resolved['v'][0] == pytest.approx((math.sqrt(5.0) - 1.0) / 2.0)
    assert resolved['v'][1] == pytest.approx(-math.sqrt(2.0))
    assert resolved['v'][2] == 3
    assert resolved['name'] == 'flow'


def test_validate_config_resolves_named_constants():
    cfg = validate_config(_linear_config())

    assert cfg.subcommand == 'asymptotic'
    assert cfg.body['curve']['velocity'][1] == pytest.approx(math.sqrt(2.0))
    assert cfg.raw['curve']['velocity'][1] == 'sqrt2'


def test_validate_config_rejects_unknown_field():
    with pytest.raises(ConfigValidationError) as exc:
        validate_config(_linear_config(bogus=1))

    assert exc.value.exit_code == 2
    assert 'bogus' in exc.value.message


def test_validate_config_reports_field_path_of_negative_tolerance():
    with pytest.raises(ConfigValidationError) as exc:
        validate_config(_linear_config(tolerances={'convergence': -1e-3}))

    assert exc.value.field_path == '$.tolerances.convergence'
    assert exc.value.to_dict()['field_path'] == '$.tolerances.convergence'


@pytest.mark.parametrize('raw', [
    [],
    {'schemaVersion': 1, 'subcommand': 'teleport', 'seed': 0},
    {'schemaVersion': 99, 'subcommand': 'asymptotic', 'seed': 0},
    {'schemaVersion': 1, 'subcommand': 'asymptotic', 'seed': -1},
])
def test_validate_config_rejects_bad_heads(raw):
    with pytest.raises(ConfigValidationError):
        validate_config(raw)


def test_run_invalid_config_exits_2_and_writes_report(tmp_path, write_json):
    path = write_json('bad.json', _linear_config(tolerances={'convergence': -1e-3}))

    report = ExperimentRunner().run(str(path), str(tmp_path / 'out'))

    assert report.exit_code == 2
    assert report.results['error']['error'] == 'ConfigValidationError'
    assert (tmp_path / 'out' / REPORT_FILE).exists()


def test_run_unreadable_json_exits_2(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"schemaVersion": 1,', encoding='utf-8')

    assert ExperimentRunner().run(str(path)).exit_code == 2


def test_subcommand_mismatch_exits_2():
    report = ExperimentRunner().run(os.path.join(GOLDEN_DIR, 'stablenorm_flat.json'), subcommand='asymptotic')

    assert report.exit_code == 2
    assert report.results['error']['field_path'] == '$.subcommand'


def test_stablenorm_flat_report(tmp_path):
    out = tmp_path / 'flat'
    report = ExperimentRunner().run(os.path.join(GOLDEN_DIR, 'stablenorm_flat.json'), str(out),
                                    subcommand='stablenorm')

    assert report.exit_code == 0
    assert all(a['success'] for a in report.assertions)
    assert report.artifacts == ['stable_norm_1_0.csv', 'stable_norm_3_4.csv']
    assert report.results['estimates']['3_4']['value'] == 5.0
    for name in report.artifacts:
        assert (out / name).exists()


def test_reports_are_deterministic_up_to_wall_time(tmp_path):
    config = os.path.join(GOLDEN_DIR, 'stablenorm_flat.json')
    ExperimentRunner().run(config, str(tmp_path / 'first'))
    ExperimentRunner().run(config, str(tmp_path / 'second'))

    first = _without_wall_time(tmp_path / 'first' / REPORT_FILE)
    second = _without_wall_time(tmp_path / 'second' / REPORT_FILE)

    assert first == second
    assert (tmp_path / 'first' / 'stable_norm_3_4.csv').read_text() == \
        (tmp_path / 'second' / 'stable_norm_3_4.csv').read_text()


def test_failed_assertion_exits_1(write_json):
    raw = {'schemaVersion': 1, 'subcommand': 'stablenorm', 'seed': 0, 'geometry': {'dim': 2},
           'classes': [[3, 4]], 'nMax': 4,
           'assertions': [{'type': 'expected', 'class': [3, 4], 'value': [4.0], 'tol': 1e-6}]}

    report = ExperimentRunner().run(str(write_json('wrong.json', raw)))

    assert report.exit_code == 1
    assert not report.assertions[0]['success']


def test_manifest_entries_all_validate():
    entries = list_golden(GOLDEN_DIR)

    assert len(entries) >= 10
    assert {e['expected_exit'] for e in entries} >= {0, 2, 3}
    covered = set()
    for entry in entries:
        with open(os.path.join(GOLDEN_DIR, entry['config']), encoding='utf-8') as f:
            raw = json.load(f)
        covered.add(raw['subcommand'])
        if entry['expected_exit'] != 2:
            validate_config(raw)
    assert covered == set(SUBCOMMANDS)


def test_incomplete_manifest_entry_is_rejected(tmp_path, write_json):
    write_json('manifest.json', [{'name': 'x', 'config': 'x.json'}])

    with pytest.raises(ConfigValidationError):
        list_golden(str(tmp_path))


@pytest.mark.slow
@pytest.mark.parametrize('entry', list_golden(GOLDEN_DIR), ids=lambda e: e['name'])
def test_golden_configuration_exit_code(entry, tmp_path):
    report = ExperimentRunner().run(os.path.join(GOLDEN_DIR, entry['config']), str(tmp_path))

    assert report.exit_code == entry['expected_exit'], report.assertions or report.results.get('error')


def test_run_all_on_small_suite(tmp_path, write_json):
    suite = tmp_path / 'suite'
    suite.mkdir()
    for name in ('stablenorm_flat.json', 'invalid_negative_tol.json'):
        with open(os.path.join(GOLDEN_DIR, name), encoding='utf-8') as f:
            (suite / name).write_text(f.read(), encoding='utf-8')
    (suite / 'manifest.json').write_text(json.dumps([
        {'name': 'flat', 'config': 'stablenorm_flat.json', 'expected_exit': 0, 'description': 'plat'},
        {'name': 'invalid', 'config': 'invalid_negative_tol.json', 'expected_exit': 2, 'description': 'invalide'},
    ]), encoding='utf-8')

    rows = run_all(str(suite), str(tmp_path / 'out'))

    assert [(r['name'], r['exit_code'], r['ok']) for r in rows] == [('flat', 0, True), ('invalid', 2, True)]
    assert (tmp_path / 'out' / 'flat' / REPORT_FILE).exists()


def test_declared_phi_assertion_counts_checked_slabs(write_json):
    raw = {'schemaVersion': 1, 'subcommand': 'ksolenoid', 'seed': 2, 'alpha': 'golden', 'samples': 50,
           'seeds': [0.3], 'N': 256, 'windows': 3, 'assertions': [{'type': 'declared_phi'}]}

    report = ExperimentRunner().run(str(write_json('phi.json', raw)))

    assert report.exit_code == 0
    assert report.assertions[0]['checked'] == 50
    assert report.results['solenoid']['checked_slabs'] == 50
