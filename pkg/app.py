"""
Point d'entrée du laboratoire - cycles asymptotiques
Interface en ligne de commande: une sous-commande par pipeline, suite de référence
"""
import json
import logging
import sys

import click

from config import get_config
from modules.experiment_runner import SUBCOMMANDS, ExperimentRunner, list_golden, run_all

# Configuration logging
logging.basicConfig(
    level=getattr(logging, get_config().LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


@click.group()
def cli():
    """Cycles asymptotiques, classes de Ruelle-Sullivan et norme stable"""


def _experiment_command(name: str):
    @click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
                  help='Configuration JSON de l\'expérience')
    @click.option('--out', 'out_dir', default=None, type=click.Path(file_okay=False),
                  help='Dossier de sortie (report.json, CSV)')
    @click.option('--threads', default=None, type=click.IntRange(min=1),
                  help='Nombre de threads pour les fenêtres et graines indépendantes')
    def command(config_path, out_dir, threads):
        out_dir = out_dir or get_config().OUTPUT_DIR
        report = ExperimentRunner(threads).run(config_path, out_dir, subcommand=name)
        for assertion in report.assertions:
            mark = '✓' if assertion['success'] else '✗'
            click.echo(f"{mark} {assertion['name']}: {assertion['message']}")
        if 'error' in report.results:
            click.echo(f"Erreur: {report.results['error']['message']}", err=True)
        click.echo(f"Code de sortie {report.exit_code} ({report.wall_time:.2f} s), rapport dans {out_dir}")
        sys.exit(report.exit_code)

    command.__doc__ = f"Exécute une expérience '{name}'"
    return cli.command(name=name)(command)


for _name in SUBCOMMANDS:
    _experiment_command(_name)


@cli.command()
@click.option('--golden-dir', default=None, type=click.Path(file_okay=False))
def golden(golden_dir):
    """Liste les configurations de référence"""
    entries = list_golden(golden_dir)
    click.echo(json.dumps(entries, indent=2, ensure_ascii=False))


@cli.command(name='run-all')
@click.option('--golden-dir', default=None, type=click.Path(file_okay=False))
@click.option('--out', 'out_dir', default=None, type=click.Path(file_okay=False))
@click.option('--threads', default=None, type=click.IntRange(min=1))
def run_all_command(golden_dir, out_dir, threads):
    """Exécute toute la suite de référence et compare les codes de sortie"""
    rows = run_all(golden_dir, out_dir, threads)
    for row in rows:
        mark = '✓' if row['ok'] else '✗'
        click.echo(f"{mark} {row['name']}: code {row['exit_code']} (attendu {row['expected_exit']})")
    sys.exit(0 if all(row['ok'] for row in rows) else 1)


if __name__ == '__main__':
    cli()
