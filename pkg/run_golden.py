#!/usr/bin/env python3
"""
Script pour exécuter la suite de référence et afficher un résumé
"""
import logging
import os
import sys
from dotenv import load_dotenv

# Charge les variables d'environnement
load_dotenv()

from config import get_config
from modules.experiment_runner import run_all

logging.basicConfig(
    level=logging.WARNING,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


def run_golden_suite(out_dir: str = None, threads: int = None) -> bool:
    """Exécute chaque configuration du manifeste et compare son code de sortie"""

    settings = get_config()
    out_dir = out_dir or os.path.join(settings.OUTPUT_DIR, 'golden')

    print(f"Suite de référence: {settings.GOLDEN_DIR}")
    rows = run_all(settings.GOLDEN_DIR, out_dir, threads)

    for row in rows:
        mark = '✓' if row['ok'] else '✗'
        print(f"{mark} {row['name']:<32} code {row['exit_code']} "
              f"(attendu {row['expected_exit']}) {row['wall_time']:.1f} s")

    passed = sum(1 for row in rows if row['ok'])
    print(f"\n{passed}/{len(rows)} configuration(s) conformes, rapports dans {out_dir}")
    return passed == len(rows)


if __name__ == "__main__":
    sys.exit(0 if run_golden_suite() else 1)
