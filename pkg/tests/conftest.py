"""
Fixtures partagées des tests du laboratoire
"""
import json
import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from modules.torus_geometry import TorusGeometry  # noqa: E402


@pytest.fixture
def flat2():
    return TorusGeometry.flat(2)


@pytest.fixture
def flat3():
    return TorusGeometry.flat(3)


@pytest.fixture
def conformal2():
    """e^{2u}·g0 avec u = 0.3·cos(2πx) + 0.2·cos(2πy)"""
    return TorusGeometry.from_descriptor({
        'dim': 2,
        'conformal': [{'k': [1, 0], 'amp': 0.3}, {'k': [0, 1], 'amp': 0.2}],
    })


@pytest.fixture
def golden_dir():
    return os.path.join(ROOT, 'configs', 'golden')


@pytest.fixture
def write_json(tmp_path):
    def _write(name, payload):
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding='utf-8')
        return path
    return _write
