"""
Tests de l'interface en ligne de commande
"""
import json
import os

from click.testing import CliRunner

from app import cli
from modules.experiment_runner import SUBCOMMANDS


def test_every_pipeline_has_a_command():
    assert set(SUBCOMMANDS) <= set(cli.commands)
    assert {'golden', 'run-all'} <= set(cli.commands)


def test_stablenorm_command_writes_report(tmp_path, golden_dir):
    result = CliRunner().invoke(cli, ['stablenorm', '--config', os.path.join(golden_dir, 'stablenorm_flat.json'),
                                      '--out', str(tmp_path)])

    assert result.exit_code == 0, result.output
    assert '✓ expected' in result.output
    report = json.loads((tmp_path / 'report.json').read_text(encoding='utf-8'))
    assert report['exit_code'] == 0


def test_wrong_subcommand_exits_2(tmp_path, golden_dir):
    result = CliRunner().invoke(cli, ['solenoid', '--config', os.path.join(golden_dir, 'stablenorm_flat.json'),
                                      '--out', str(tmp_path)])

    assert result.exit_code == 2


def test_invalid_config_exits_2(tmp_path, golden_dir):
    result = CliRunner().invoke(cli, ['asymptotic', '--config', os.path.join(golden_dir, 'invalid_negative_tol.json'),
                                      '--out', str(tmp_path)])

    assert result.exit_code == 2
    report = json.loads((tmp_path / 'report.json').read_text(encoding='utf-8'))
    assert report['results']['error']['field_path'] == '$.tolerances.convergence'


def test_threads_must_be_positive(golden_dir):
    result = CliRunner().invoke(cli, ['stablenorm', '--config', os.path.join(golden_dir, 'stablenorm_flat.json'),
                                      '--threads', '0'])

    assert result.exit_code == 2
    assert 'threads' in result.output


def test_golden_lists_manifest(golden_dir):
    result = CliRunner().invoke(cli, ['golden', '--golden-dir', golden_dir])

    assert result.exit_code == 0
    names = [entry['name'] for entry in json.loads(result.output)]
    assert 'stablenorm_flat' in names
