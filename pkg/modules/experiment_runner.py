"""
Lanceur d'expériences du laboratoire
Validation des configurations JSON, pipelines par sous-commande, rapports et suite de référence
"""
import copy
import csv
import json
import logging
import math
import os
import re
import time
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from jsonschema import Draft7Validator
from jsonschema.exceptions import best_match

from config import get_config
from models import AsymptoticEstimate, ExperimentConfig, Report, WindowGrid, WindowSchedule
from modules.asymptotic_cycles import (DEFAULT_ANGULAR_TOL, ROUTES, CircleMap, Hypersurface, OneForm,
                                       balanced_cluster_check, closing_independence, cluster_scan,
                                       default_payload, parallel_map, route_agreement, route_estimate,
                                       schwartzman_class, unparametrized_cluster)
from modules.calibration import (CalibratingFunction, calibrator_difference_bound, identity_calibrator,
                                 loop_class, partition_calibrator)
from modules.errors import ConfigValidationError, ConsistencyError, LabError
from modules.homology import angular_distance
from modules.ksolenoid import (constants_consistency, exhaustion_control_check, exhaustion_schedule,
                               k_schwartzman_class, random_window_audit, slab_adjacency_is_path,
                               t3_ruelle_sullivan_class, t3_trapping_solenoid)
from modules.solenoid import (SuspensionSolenoid, cluster_inclusion_check, controlled_growth_ratio,
                              empirical_transversal_measure, leaf_schwartzman_class, measured_class_report,
                              realize_as_torus_flow)
from modules.stable_norm import LoopLengthSolver, multiple_lengths, stable_norm, subadditivity_audit
from modules.torus_geometry import TorusGeometry
from modules.trajectories import (BoundedDisplacement, CounterexampleSpec, OscillatorSpec, SpeedFunction,
                                  VectorField, arc_length_reparametrize, axes_oscillator_curve,
                                  constant_curve, counterexample_curve, counterexample_schedule,
                                  integrate_flow, linear_flow_curve, loop_curve, perturb_bounded)
from modules.transversal import (AtomicMeasure, PiecewiseConstantWeight, birkhoff_average, invariance_defect,
                                 roof_from_descriptor, system_from_descriptor)

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('asymptotic', 'cluster', 'counterexample', 'solenoid', 'ksolenoid', 'stablenorm')

NAMED_CONSTANTS = {
    'golden': (math.sqrt(5.0) - 1.0) / 2.0,
    'sqrt2': math.sqrt(2.0),
    'sqrt3': math.sqrt(3.0),
    'sqrt5': math.sqrt(5.0),
    'pi': math.pi,
}
NAME_PATTERN = '^-?(golden|sqrt2|sqrt3|sqrt5|pi)$'

REPORT_FILE = 'report.json'
MANIFEST_FILE = 'manifest.json'


# ==================== SCHÉMAS ====================

def _object(properties: Dict[str, Any], required: Sequence[str] = ()) -> Dict[str, Any]:
    schema = {'type': 'object', 'properties': properties, 'additionalProperties': False}
    if required:
        schema['required'] = list(required)
    return schema


def _array(items: Dict[str, Any], min_items: int = 0) -> Dict[str, Any]:
    return {'type': 'array', 'items': items, 'minItems': min_items}


REAL = {'anyOf': [{'type': 'number'}, {'type': 'string', 'pattern': NAME_PATTERN}]}
POSITIVE = {'type': 'number', 'exclusiveMinimum': 0}
NON_NEGATIVE = {'type': 'number', 'minimum': 0}
COUNT = {'type': 'integer', 'minimum': 1}
VECTOR = _array(REAL, 1)
INT_VECTOR = _array({'type': 'integer'}, 1)
PAIR = {'type': 'array', 'items': REAL, 'minItems': 2, 'maxItems': 2}

TRIG_TERMS = _array(_object({'k': INT_VECTOR, 'amp': REAL, 'sin': REAL, 'phase': REAL}, ['k']))
GEOMETRY = _object({'dim': COUNT, 'gram': _array(VECTOR, 1), 'conformal': TRIG_TERMS}, ['dim'])
TOLERANCES = _object({'convergence': POSITIVE, 'transversality': POSITIVE,
                      'angular': POSITIVE, 'integration': POSITIVE})

CURVE = _object({
    'type': {'enum': ['linear', 'loop', 'flow', 'oscillator', 'constant']},
    'velocity': VECTOR,
    'x0': VECTOR,
    'class': INT_VECTOR,
    'arclength': {'type': 'boolean'},
    'field': _object({'components': _array(TRIG_TERMS, 1), 'profile': TRIG_TERMS, 'direction': VECTOR}),
    'horizon': POSITIVE,
    'method': {'enum': ['DOP853', 'RK45', 'Radau']},
    'firstLength': POSITIVE,
    'ratio': POSITIVE,
    'corridor': POSITIVE,
    'firstAxis': {'enum': [0, 1]},
}, ['type'])

SCHEDULE = _object({
    'rule': {'enum': ['geometric', 'independent', 'linear', 'explicit']},
    'maxSpan': POSITIVE,
    'count': COUNT,
    'ratio': POSITIVE,
    's0': NON_NEGATIVE,
    't0': NON_NEGATIVE,
    'windows': _array(PAIR, 1),
    'unit': {'enum': ['time', 'period']},
}, ['rule'])

GRID = _object({'s0': POSITIVE, 't0': POSITIVE, 'count': COUNT, 'ratio': POSITIVE,
                'starts': VECTOR, 'ends': VECTOR})

SPEEDS = _array(_object({'kind': {'enum': ['constant', 'schedule']}, 'factor': POSITIVE,
                         'knots': _array(PAIR, 2)}, ['kind']), 1)

PAYLOAD = _object({
    'scheme': {'enum': ['shortest', 'chart']},
    'calibrator': _object({'type': {'enum': ['identity', 'partition']}, 'bump': {'enum': ['tent', 'cosine']},
                           'radius': POSITIVE, 'basepoint': VECTOR}),
    'forms': _array(_object({'a': VECTOR, 'potential': TRIG_TERMS}, ['a']), 1),
    'maps': _array(_object({'k': INT_VECTOR, 'c': REAL}, ['k']), 1),
    'hypersurfaces': _array(_object({'k': INT_VECTOR, 'c': REAL, 'orientation': {'enum': [1, -1]}}, ['k']), 1),
})

PERTURBATION = _object({
    'bound': NON_NEGATIVE,
    'terms': _array(_object({'amp': VECTOR, 'omega': REAL, 'phase': REAL}, ['amp'])),
}, ['bound'])

PHI = _object({'cells': _array(_object({'cell': PAIR, 'class': VECTOR}, ['cell', 'class'])),
               'default': VECTOR}, ['default'])
ROOF = {'anyOf': [POSITIVE,
                  _object({'cells': _array(_object({'cell': PAIR, 'value': REAL}, ['cell', 'value'])),
                           'default': REAL}, ['default']),
                  _object({'trig': TRIG_TERMS}, ['trig'])]}
BASE = _object({
    'type': {'enum': ['rotation', 'iet', 'odometer', 'finite']},
    'alpha': REAL,
    'lengths': VECTOR,
    'permutation': _array({'type': 'integer', 'minimum': 0}, 1),
    'depth': COUNT,
    'weights': VECTOR,
    'measure_scale': POSITIVE,
}, ['type'])
SEEDS = {'anyOf': [_array(REAL, 1), _object({'count': COUNT}, ['count'])]}

ASSERTION_FIELDS = {
    'tol': POSITIVE,
    'value': VECTOR,
    'class': INT_VECTOR,
    'count': {'type': 'integer', 'minimum': 0},
    'directions': _array(VECTOR, 1),
    'depth': COUNT,
    'min': NON_NEGATIVE,
    'factor': {'type': 'integer', 'minimum': 2},
    'loops': COUNT,
    'seeds': COUNT,
    'N': COUNT,
    'dims': _array(COUNT, 1),
}


def _assertions(names: Sequence[str]) -> Dict[str, Any]:
    return _array(_object(dict(ASSERTION_FIELDS, type={'enum': list(names)}), ['type']))


def _schema(properties: Dict[str, Any], required: Sequence[str] = ()) -> Dict[str, Any]:
    common = {
        'schemaVersion': {'const': get_config().SCHEMA_VERSION},
        'subcommand': {'enum': list(SUBCOMMANDS)},
        'seed': {'type': 'integer', 'minimum': 0},
        'description': {'type': 'string'},
        'tolerances': TOLERANCES,
    }
    return _object(dict(common, **properties), ['schemaVersion', 'subcommand', 'seed'] + list(required))


SCHEMAS = {
    'asymptotic': _schema({
        'geometry': GEOMETRY,
        'curve': CURVE,
        'routes': {'type': 'array', 'items': {'enum': list(ROUTES)}, 'minItems': 1, 'uniqueItems': True},
        'schedule': SCHEDULE,
        'payload': PAYLOAD,
        'perturbation': PERTURBATION,
        'assertions': _assertions(['converged', 'expected', 'routes_agree', 'closing_independence',
                                   'perturbation_invariance', 'calibrator_identity']),
    }, ['curve']),
    'cluster': _schema({
        'geometry': GEOMETRY,
        'curve': CURVE,
        'grid': GRID,
        'speeds': SPEEDS,
        'scheme': {'enum': ['shortest', 'chart']},
        'balanceSpan': {'type': 'number', 'exclusiveMinimum': 1},
        'assertions': _assertions(['balanced_in_hull', 'rays']),
    }, ['curve']),
    'counterexample': _schema({
        'construction': _object({
            'depths': COUNT, 'slope': REAL, 'firstTime': POSITIVE, 'rayRatio': {'type': 'number', 'exclusiveMinimum': 1},
            'travelRatio': {'type': 'number', 'exclusiveMinimum': 1}, 'pauseRatio': {'type': 'number', 'exclusiveMinimum': 1},
            'drift': POSITIVE, 'speedCap': POSITIVE, 'targetsA': _array(PAIR, 1), 'targetsB': _array(PAIR, 1),
        }),
        'assertions': _assertions(['balanced_midpoint', 'full_near_zero', 'balanced_away_from_zero',
                                   'balanced_in_hull']),
    }),
    'solenoid': _schema({
        'base': BASE,
        'roof': ROOF,
        'phi': PHI,
        'realization': _object({'alpha': REAL, 'parametrization': {'enum': ['time', 'arclength']}}, ['alpha']),
        'seeds': SEEDS,
        'N': {'type': 'integer', 'minimum': 8},
        'growth': _object({'radii': VECTOR, 'fraction': REAL}, ['radii']),
        'measures': _array(_object({'atoms': VECTOR, 'weights': VECTOR}, ['atoms', 'weights']), 1),
        'assertions': _assertions(['leaf_classes', 'loop_cross_check', 'crossing_route', 'empirical_measure',
                                   'controlled_growth', 'cluster_inclusion', 'invariance']),
    }, ['N']),
    'ksolenoid': _schema({
        'alpha': REAL,
        'wrapCell': {'anyOf': [PAIR, {'type': 'null'}]},
        'areaRoof': {'type': 'boolean'},
        'samples': COUNT,
        'declaredPhi': PHI,
        'constants': _object({'c0': POSITIVE, 'c1': POSITIVE, 'c2': POSITIVE}, ['c0', 'c1', 'c2']),
        'seeds': SEEDS,
        'N': {'type': 'integer', 'minimum': 8},
        'windows': COUNT,
        'withCaps': {'type': 'boolean'},
        'radii': _object({'base': {'type': 'number', 'exclusiveMinimum': 1}, 'maxExponent': COUNT}),
        'audit': _object({'windows': COUNT, 'maxRadius': POSITIVE}),
        'assertions': _assertions(['k_classes', 'declared_phi', 'constants', 'exhaustion_control',
                                   'window_audit', 'slab_path']),
    }, ['alpha', 'N']),
    'stablenorm': _schema({
        'geometry': GEOMETRY,
        'classes': _array(INT_VECTOR, 1),
        'nMax': {'type': 'integer', 'minimum': 4},
        'resolution': {'type': 'integer', 'minimum': 2},
        'forceGrid': {'type': 'boolean'},
        'audit': _object({'pairs': COUNT, 'range': COUNT, 'resolution': {'type': 'integer', 'minimum': 2}}),
        'assertions': _assertions(['expected', 'homogeneity', 'subadditivity', 'self_convergence',
                                   'lower_bound', 'strict_subadditivity']),
    }, ['geometry', 'classes', 'nMax']),
}

HEAD_SCHEMA = {
    'type': 'object',
    'properties': {
        'schemaVersion': {'const': get_config().SCHEMA_VERSION},
        'subcommand': {'enum': list(SUBCOMMANDS)},
        'seed': {'type': 'integer', 'minimum': 0},
    },
    'required': ['schemaVersion', 'subcommand', 'seed'],
}


# ==================== VALIDATION ====================

def _field_path(path) -> str:
    return '$' + ''.join(f'[{p}]' if isinstance(p, int) else f'.{p}' for p in path)


def _check(schema: Dict[str, Any], raw: Dict[str, Any]) -> None:
    error = best_match(Draft7Validator(schema).iter_errors(raw))
    if error is not None:
        path = _field_path(error.absolute_path)
        raise ConfigValidationError(f"Configuration invalide en {path}: {error.message}", path)


def resolve_constants(value):
    """Remplace les constantes nommées ("golden", "-sqrt2", ...) par leur valeur"""
    if isinstance(value, str) and re.fullmatch(NAME_PATTERN, value):
        sign = -1.0 if value.startswith('-') else 1.0
        return sign * NAMED_CONSTANTS[value.lstrip('-')]
    if isinstance(value, list):
        return [resolve_constants(v) for v in value]
    if isinstance(value, dict):
        return {k: resolve_constants(v) for k, v in value.items()}
    return value


def validate_config(raw: Any) -> ExperimentConfig:
    """
    Valide une configuration brute (champs inconnus refusés, tolérances > 0).

    Args:
        raw: Objet JSON chargé

    Returns:
        ExperimentConfig avec constantes nommées résolues

    Raises:
        ConfigValidationError: avec le chemin du champ fautif
    """
    if not isinstance(raw, dict):
        raise ConfigValidationError("La configuration doit être un objet JSON", '$')
    _check(HEAD_SCHEMA, raw)
    _check(SCHEMAS[raw['subcommand']], raw)
    body = resolve_constants({k: v for k, v in raw.items() if k not in ('schemaVersion', 'subcommand', 'seed')})
    return ExperimentConfig(schema_version=raw['schemaVersion'], subcommand=raw['subcommand'],
                            seed=raw['seed'], body=body, raw=copy.deepcopy(raw))


def _require(desc: Dict[str, Any], key: str, path: str):
    if key not in desc:
        raise ConfigValidationError(f"Champ requis manquant: {path}.{key}", f"{path}.{key}")
    return desc[key]


def _assertion(name: str, success: bool, message: str, **details) -> Dict[str, Any]:
    return dict({'name': name, 'success': bool(success), 'message': message}, **details)


def _class_label(klass) -> str:
    return '_'.join(str(int(v)) for v in klass)


def _write_csv(path: str, header: List[str], rows: List[List[Any]]) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


# ==================== LANCEUR ====================

class ExperimentRunner:
    """
    Exécute une configuration et produit un Report.
    Codes de sortie: 0 succès, 1 assertion en échec, 2 configuration invalide, 3 échec numérique.
    """

    def __init__(self, threads: Optional[int] = None):
        self.settings = get_config()
        self.threads = threads or self.settings.THREADS

    @staticmethod
    def load(path: str) -> Dict[str, Any]:
        """Charge un fichier JSON de configuration"""
        try:
            with open(path, encoding='utf-8') as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigValidationError(f"JSON illisible ({path}): {e}", '$')
        except OSError as e:
            raise ConfigValidationError(f"Configuration introuvable ({path}): {e}", '$')

    def run(self, source, out_dir: Optional[str] = None, subcommand: Optional[str] = None) -> Report:
        """
        Valide puis exécute une expérience.

        Args:
            source: Chemin du fichier JSON ou configuration déjà chargée
            out_dir: Dossier de sortie (report.json, CSV); aucun fichier si None
            subcommand: Sous-commande demandée en ligne de commande (doit correspondre)

        Returns:
            Report
        """
        started = time.perf_counter()
        raw: Any = source if isinstance(source, dict) else None
        results: Dict[str, Any] = {}
        assertions: List[Dict[str, Any]] = []
        artifacts: List[str] = []
        try:
            if raw is None:
                raw = self.load(source)
            cfg = validate_config(raw)
            if subcommand and cfg.subcommand != subcommand:
                raise ConfigValidationError(
                    f"Sous-commande '{subcommand}' appliquée à une configuration '{cfg.subcommand}'",
                    '$.subcommand')
            if out_dir:
                os.makedirs(out_dir, exist_ok=True)
            logger.info(f"Expérience {cfg.subcommand} (graine {cfg.seed}, {self.threads} thread(s))")
            pipeline: Callable = getattr(self, f'_run_{cfg.subcommand}')
            results, assertions, artifacts = pipeline(cfg, out_dir)
            failed = [a for a in assertions if not a['success']]
            for a in failed:
                logger.warning(f"Assertion en échec: {a['name']} - {a['message']}")
            exit_code = 1 if failed else 0
        except LabError as e:
            logger.error(f"Expérience interrompue ({type(e).__name__}): {e.message}")
            results = {'error': e.to_dict()}
            exit_code = e.exit_code
        except Exception as e:
            logger.error(f"Erreur inattendue pendant l'expérience: {e}")
            results = {'error': {'error': type(e).__name__, 'message': str(e)}}
            exit_code = 3

        report = Report(config=raw if isinstance(raw, dict) else {}, results=results, assertions=assertions,
                        exit_code=exit_code, schema_version=self.settings.SCHEMA_VERSION,
                        artifacts=sorted(artifacts))
        report.wall_time = time.perf_counter() - started
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, REPORT_FILE), 'w', encoding='utf-8') as f:
                f.write(report.to_json())
            logger.info(f"Rapport écrit dans {out_dir} (code {exit_code})")
        return report

    # ----- construction des objets -----

    def _tolerances(self, cfg: ExperimentConfig) -> Dict[str, float]:
        tols = cfg.body.get('tolerances', {})
        return {
            'convergence': tols.get('convergence', self.settings.CONVERGENCE_TOL),
            'transversality': tols.get('transversality', self.settings.TRANSVERSALITY_TOL),
            'angular': tols.get('angular', DEFAULT_ANGULAR_TOL),
            'integration': tols.get('integration', 1e-10),
        }

    @staticmethod
    def _geometry(body: Dict[str, Any]) -> TorusGeometry:
        return TorusGeometry.from_descriptor(body.get('geometry') or {'dim': 2})

    @staticmethod
    def _curve(desc: Dict[str, Any], geom: TorusGeometry, tols: Dict[str, float]):
        kind = desc['type']
        zero = np.zeros(geom.dim)
        if kind == 'linear':
            curve = linear_flow_curve(_require(desc, 'velocity', '$.curve'), desc.get('x0'))
        elif kind == 'loop':
            return loop_curve(geom, _require(desc, 'class', '$.curve'), desc.get('arclength', True), desc.get('x0'))
        elif kind == 'flow':
            field = VectorField.from_descriptor(geom.dim, _require(desc, 'field', '$.curve'))
            curve = integrate_flow(field, desc.get('x0', zero), _require(desc, 'horizon', '$.curve'),
                                   tols['integration'], desc.get('method', 'DOP853'))
        elif kind == 'oscillator':
            curve = axes_oscillator_curve(OscillatorSpec(
                first_length=desc.get('firstLength', 4.0), ratio=desc.get('ratio', 4.0),
                corridor=desc.get('corridor', 0.1), first_axis=desc.get('firstAxis', 0)))
        else:
            curve = constant_curve(desc.get('x0', zero))
        if desc.get('arclength'):
            curve = arc_length_reparametrize(curve, geom, desc.get('horizon'))
        return curve

    @staticmethod
    def _schedule(desc: Optional[Dict[str, Any]], curve) -> WindowSchedule:
        if desc is None:
            return WindowSchedule.geometric(1e4, 8)
        rule, ratio = desc['rule'], desc.get('ratio', 2.0)
        if rule == 'geometric':
            schedule = WindowSchedule.geometric(_require(desc, 'maxSpan', '$.schedule'),
                                                _require(desc, 'count', '$.schedule'), ratio)
        elif rule == 'independent':
            schedule = WindowSchedule.independent(_require(desc, 's0', '$.schedule'), _require(desc, 't0', '$.schedule'),
                                                  _require(desc, 'count', '$.schedule'), ratio)
        elif rule == 'linear':
            schedule = WindowSchedule.linear(_require(desc, 'maxSpan', '$.schedule'),
                                             _require(desc, 'count', '$.schedule'))
        else:
            schedule = WindowSchedule.explicit(_require(desc, 'windows', '$.schedule'))
        if desc.get('unit') == 'period':
            period = curve.metadata.get('period')
            if period is None:
                raise ConfigValidationError("Unité 'period' réservée aux courbes périodiques", '$.schedule.unit')
            schedule = schedule.scaled(period)
        return schedule

    @staticmethod
    def _payload(route: str, desc: Optional[Dict[str, Any]], dim: int, tols: Dict[str, float]) -> Dict[str, Any]:
        payload = default_payload(route, dim)
        desc = desc or {}
        if route == 'loop' and 'scheme' in desc:
            payload['scheme'] = desc['scheme']
        elif route == 'calib' and 'calibrator' in desc:
            payload['calibrator'] = CalibratingFunction.from_descriptor(dim, desc['calibrator'])
        elif route == 'form' and 'forms' in desc:
            payload['forms'] = [OneForm.from_descriptor(dim, f) for f in desc['forms']]
        elif route == 'circle' and 'maps' in desc:
            payload['maps'] = [CircleMap.from_descriptor(m) for m in desc['maps']]
        elif route == 'cross':
            if 'hypersurfaces' in desc:
                payload['hypersurfaces'] = [Hypersurface.from_descriptor(h) for h in desc['hypersurfaces']]
            payload['transversality_tol'] = tols['transversality']
        return payload

    @staticmethod
    def _grid(desc: Optional[Dict[str, Any]]) -> WindowGrid:
        desc = desc or {}
        if 'starts' in desc or 'ends' in desc:
            return WindowGrid(tuple(_require(desc, 'starts', '$.grid')), tuple(_require(desc, 'ends', '$.grid')))
        return WindowGrid.geometric(desc.get('s0', 10.0), desc.get('t0', 10.0), desc.get('count', 12),
                                    desc.get('ratio', 2.0))

    @staticmethod
    def _seeds(spec, rng: np.random.Generator) -> List[float]:
        if spec is None:
            spec = {'count': 8}
        if isinstance(spec, dict):
            return [float(v) for v in rng.uniform(0.0, 1.0, spec['count'])]
        return [float(v) for v in spec]

    @staticmethod
    def _write_cluster(est, out_dir: Optional[str]) -> List[str]:
        if not out_dir:
            return []
        names = []
        for name, cloud in (('full', est.full), ('positive', est.positive),
                            ('negative', est.negative), ('balanced', est.balanced)):
            filename = f'cluster_{name}.csv'
            cloud.to_csv(os.path.join(out_dir, filename))
            names.append(filename)
        return names

    # ----- pipelines -----

    def _run_asymptotic(self, cfg: ExperimentConfig, out_dir: Optional[str]):
        body = cfg.body
        tols = self._tolerances(cfg)
        geom = self._geometry(body)
        curve = self._curve(body['curve'], geom, tols)
        schedule = self._schedule(body.get('schedule'), curve)
        routes = body.get('routes', ['loop'])

        estimates = {}
        for route in routes:
            payload = self._payload(route, body.get('payload'), geom.dim, tols)
            estimates[route] = schwartzman_class(curve, geom, tols['convergence'], schedule, route, payload,
                                                 self.threads, tols['angular'])
        results: Dict[str, Any] = {
            'curve': {'kind': curve.kind, 'dim': curve.dim, 'smoothness': curve.smoothness},
            'schedule': schedule.to_dict(),
            'routes': {route: est.to_dict() for route, est in estimates.items()},
        }
        converged = {r: e for r, e in estimates.items() if isinstance(e, AsymptoticEstimate)}
        if len(converged) > 1:
            results['route_spread'] = route_agreement(converged)

        assertions = []
        for spec in body.get('assertions', []):
            kind = spec['type']
            if kind == 'converged':
                missing = sorted(set(estimates) - set(converged))
                assertions.append(_assertion(kind, not missing, f"Voies non convergées: {missing}"
                                             if missing else "Toutes les voies convergent"))
            elif kind == 'expected':
                target = np.array(_require(spec, 'value', '$.assertions'), dtype=float)
                tol = spec.get('tol', tols['convergence'])
                gaps = {r: float(np.linalg.norm(self._estimate_value(e) - target)) for r, e in estimates.items()}
                assertions.append(_assertion(kind, all(g <= tol for g in gaps.values()),
                                             f"Écart max à la valeur attendue {max(gaps.values()):.3g} (tol {tol})",
                                             gaps=gaps))
            elif kind == 'routes_agree':
                tol = spec.get('tol', tols['convergence'])
                spread = route_agreement(converged) if len(converged) == len(estimates) else math.inf
                assertions.append(_assertion(kind, spread <= tol, f"Écart entre voies {spread:.3g} (tol {tol})",
                                             spread=spread))
            elif kind == 'closing_independence':
                report = closing_independence(curve, geom, schedule)
                results['closing_independence'] = report
                tol = spec.get('tol', tols['convergence'])
                last = report['normalized_differences'][-1]
                assertions.append(_assertion(kind, report['bounded'] and last <= tol,
                                             f"C = {report['C']:.3g}, écart normalisé final {last:.3g}"))
            elif kind == 'perturbation_invariance':
                assertions.append(self._perturbation_check(spec, body, curve, geom, schedule, routes[0],
                                                           estimates[routes[0]], tols, results))
            elif kind == 'calibrator_identity':
                assertions.append(self._calibrator_check(spec, geom.dim, cfg.seed, results))
        return results, assertions, []

    @staticmethod
    def _estimate_value(est) -> np.ndarray:
        if isinstance(est, AsymptoticEstimate):
            return est.value.coords
        return np.asarray(est.last_values[-1], dtype=float)

    def _perturbation_check(self, spec, body, curve, geom, schedule, route, reference, tols, results):
        desc = _require(body, 'perturbation', '$')
        displacement = BoundedDisplacement.from_terms(geom.dim, desc.get('terms', []))
        perturbed = perturb_bounded(curve, displacement, desc['bound'])
        payload = self._payload(route, body.get('payload'), geom.dim, tols)
        est = schwartzman_class(perturbed, geom, tols['convergence'], schedule, route, payload,
                                self.threads, tols['angular'])
        results['perturbed'] = est.to_dict()
        tol = spec.get('tol', tols['convergence'])
        gap = float(np.linalg.norm(self._estimate_value(est) - self._estimate_value(reference)))
        return _assertion('perturbation_invariance', gap <= tol,
                          f"Écart dû à la perturbation {gap:.3g} (borne D = {desc['bound']}, tol {tol})", gap=gap)

    @staticmethod
    def _calibrator_check(spec, dim: int, seed: int, results) -> Dict[str, Any]:
        tol = spec.get('tol', 1e-12)
        loops = spec.get('loops', 100)
        rng = np.random.default_rng(seed)
        rows = []
        success = True
        for n in spec.get('dims', [dim]):
            partition = partition_calibrator(n, 'tent', 1.0)
            difference = calibrator_difference_bound(partition, identity_calibrator(n))
            failures = 0
            for _ in range(loops):
                g = rng.integers(-3, 4, n).astype(float)
                start = rng.uniform(-5.0, 5.0, n)
                middle = start + np.cumsum(rng.normal(0.0, 1.0, (int(rng.integers(2, 8)), n)), axis=0)
                pts = np.vstack([start, middle, start + g])
                try:
                    klass = loop_class(partition, pts)
                    failures += 0 if np.array_equal(klass.coords, g) else 1
                except ConsistencyError:
                    failures += 1
            rows.append({'dim': n, 'difference': difference, 'loop_failures': failures})
            success = success and difference <= tol and failures == 0
        results['calibrator_identity'] = rows
        return _assertion('calibrator_identity', success,
                          f"Calibrant partition vs identité: {rows}", rows=rows)

    def _run_cluster(self, cfg: ExperimentConfig, out_dir: Optional[str]):
        body = cfg.body
        tols = self._tolerances(cfg)
        geom = self._geometry(body)
        curve = self._curve(body['curve'], geom, tols)
        grid = self._grid(body.get('grid'))
        est = cluster_scan(curve, geom, grid, tols['convergence'], body.get('balanceSpan'),
                           body.get('scheme', 'shortest'))
        artifacts = self._write_cluster(est, out_dir)
        speeds = [SpeedFunction(s['kind'], s.get('factor', 1.0), tuple(tuple(k) for k in s.get('knots', [])))
                  for s in body.get('speeds', [{'kind': 'constant'}])]
        _, cone = unparametrized_cluster(curve, geom, speeds, grid, tols['convergence'], tols['angular'])
        results = {'grid': grid.to_dict(), 'cluster': est.to_dict(), 'cone': cone.to_dict()}

        assertions = []
        for spec in body.get('assertions', []):
            kind = spec['type']
            if kind == 'balanced_in_hull':
                check = balanced_cluster_check(est, spec.get('tol', tols['convergence']))
                results['balanced_check'] = check
                assertions.append(_assertion(kind, check['success'],
                                             f"Distance max à l'enveloppe additive {check['worst_distance']:.3g}"))
            elif kind == 'rays':
                assertions.append(self._rays_check(spec, cone, tols))
        return results, assertions, artifacts

    @staticmethod
    def _rays_check(spec, cone, tols) -> Dict[str, Any]:
        expected = spec.get('count')
        tol = spec.get('tol', tols['angular'])
        success = expected is None or cone.ray_count == expected
        errors = []
        for d in spec.get('directions', []):
            d = np.array(d, dtype=float)
            err = min((angular_distance(d, r) for r in cone.rays), default=math.inf)
            errors.append(err)
            success = success and err <= tol
        return _assertion('rays', success, f"{cone.ray_count} rayon(s) (attendu {expected}), "
                                           f"erreurs angulaires {errors}", angular_errors=errors)

    def _run_counterexample(self, cfg: ExperimentConfig, out_dir: Optional[str]):
        body = cfg.body
        tols = self._tolerances(cfg)
        desc = body.get('construction', {})
        kwargs = {'depths': 'depths', 'slope': 'slope', 'firstTime': 'first_time', 'rayRatio': 'ray_ratio',
                  'travelRatio': 'travel_ratio', 'pauseRatio': 'pause_ratio', 'drift': 'drift',
                  'speedCap': 'speed_cap'}
        params = {attr: desc[key] for key, attr in kwargs.items() if key in desc}
        if 'targetsA' in desc or 'targetsB' in desc:
            params['targets_a'] = tuple(tuple(p) for p in _require(desc, 'targetsA', '$.construction'))
            params['targets_b'] = tuple(tuple(p) for p in _require(desc, 'targetsB', '$.construction'))
        spec = CounterexampleSpec(**params)
        curve = counterexample_curve(spec)
        schedule = counterexample_schedule(spec)
        ends = tuple(schedule.ray_ends) + (schedule.pause_time,)
        grid = WindowGrid(tuple(-t for t in ends), ends)
        est = cluster_scan(curve, TorusGeometry.flat(2), grid, tols['convergence'], spec.ray_ratio)
        artifacts = self._write_cluster(est, out_dir)

        full_norms = np.linalg.norm(est.full.points, axis=1)
        balanced_norms = np.linalg.norm(est.balanced.points, axis=1) if len(est.balanced) else np.zeros(0)
        results = {
            'schedule': schedule.to_dict(),
            'cluster': est.to_dict(),
            'full_min_norm': float(full_norms.min()),
            'balanced_min_norm': float(balanced_norms.min()) if balanced_norms.size else None,
        }
        a_targets, b_targets = spec.targets()

        assertions = []
        for check in body.get('assertions', []):
            kind = check['type']
            tol = check.get('tol', 1e-2)
            if kind == 'balanced_midpoint':
                depth = check.get('depth', len(schedule.ray_ends))
                R = schedule.ray_ends[depth - 1]
                midpoint = 0.5 * (a_targets[depth - 1] + b_targets[depth - 1])
                hits = [p for p, (s, t) in zip(est.balanced.points, est.balanced.provenance)
                        if s == -R and t == R]
                gap = float(np.linalg.norm(hits[0] - midpoint)) if hits else math.inf
                assertions.append(_assertion(kind, gap <= tol, f"Profondeur {depth}: échantillon équilibré à "
                                             f"{gap:.3g} du milieu {midpoint.tolist()}", gap=gap))
            elif kind == 'full_near_zero':
                assertions.append(_assertion(kind, results['full_min_norm'] <= tol,
                                             f"Distance min de l'amas complet à 0: {results['full_min_norm']:.3g}"))
            elif kind == 'balanced_away_from_zero':
                bound = check.get('min', 0.04)
                value = results['balanced_min_norm']
                assertions.append(_assertion(kind, value is not None and value >= bound,
                                             f"Distance min de l'amas équilibré à 0: {value} (min {bound})"))
            elif kind == 'balanced_in_hull':
                report = balanced_cluster_check(est, tol)
                results['balanced_check'] = report
                assertions.append(_assertion(kind, report['success'],
                                             f"Distance max à l'enveloppe additive {report['worst_distance']:.3g}"))
        return results, assertions, artifacts

    def _run_solenoid(self, cfg: ExperimentConfig, out_dir: Optional[str]):
        body = cfg.body
        tols = self._tolerances(cfg)
        rng = np.random.default_rng(cfg.seed)
        realization = body.get('realization')
        if realization:
            _, sol = realize_as_torus_flow(realization['alpha'], realization.get('parametrization', 'time'))
        else:
            base = system_from_descriptor(_require(body, 'base', '$'))
            phi_desc = _require(body, 'phi', '$')
            phi = PiecewiseConstantWeight.from_descriptor(phi_desc.get('cells', []), phi_desc['default'])
            sol = SuspensionSolenoid(base, roof_from_descriptor(body.get('roof', 1.0)), phi)
        seeds = self._seeds(body.get('seeds'), rng)
        N = body['N']
        tol = tols['convergence']

        report = measured_class_report(sol, seeds, N, tol, self.threads)
        results: Dict[str, Any] = {
            'solenoid': sol.to_dict(),
            'measured': report.to_dict(),
            'birkhoff': birkhoff_average(sol.base, sol.phi, seeds[0], N).to_dict(),
        }

        assertions = []
        for spec in body.get('assertions', []):
            kind = spec['type']
            atol = spec.get('tol', tol)
            if kind == 'leaf_classes':
                converged = all(isinstance(leaf, AsymptoticEstimate) for leaf in report.leaf_classes)
                assertions.append(_assertion(kind, converged and report.max_deviation <= atol,
                                             f"Écart max feuilles / Ruelle-Sullivan {report.max_deviation:.3g}"))
            elif kind == 'loop_cross_check':
                gaps = [float(np.linalg.norm(self._estimate_value(leaf)
                                             - self._estimate_value(leaf.cross_checks['loop'])))
                        for leaf in report.leaf_classes if 'loop' in leaf.cross_checks]
                assertions.append(_assertion(kind, bool(gaps) and max(gaps) <= atol,
                                             f"Écart max voie des lacets {max(gaps, default=math.inf):.3g}"))
            elif kind == 'crossing_route':
                assertions.append(self._crossing_check(spec, sol, seeds, N, atol, results))
            elif kind == 'empirical_measure':
                measure_seeds = [float(v) for v in rng.uniform(0.0, 1.0, spec.get('seeds', 8))]
                distances = [empirical_transversal_measure(sol, s, spec.get('N', N))[1] for s in measure_seeds]
                results['empirical_measure'] = {'seeds': measure_seeds, 'distances': distances}
                assertions.append(_assertion(kind, max(distances) <= atol,
                                             f"Distance max à la mesure transverse {max(distances):.3g}"))
            elif kind == 'controlled_growth':
                growth = body.get('growth', {'radii': [2.0 ** j for j in range(1, 11)]})
                rows = controlled_growth_ratio(sol, seeds[0], growth['radii'], growth.get('fraction', 0.5))
                results['controlled_growth'] = rows
                ratios = [r['ratio'] for r in rows if r['ratio'] is not None]
                ok = bool(ratios) and ratios[-1] <= ratios[0] and ('tol' not in spec or ratios[-1] <= atol)
                assertions.append(_assertion(kind, ok, f"Rapports de croissance {ratios}"))
            elif kind == 'cluster_inclusion':
                measures = [AtomicMeasure(m['atoms'], m['weights']) for m in _require(body, 'measures', '$')]
                check = cluster_inclusion_check(sol, seeds, N, measures, atol)
                results['cluster_inclusion'] = check
                assertions.append(_assertion(kind, check['success'],
                                             f"Distance max à l'enveloppe des classes {check['worst_distance']:.3g}"))
            elif kind == 'invariance':
                defect = invariance_defect(sol.base, lambda x: np.cos(2.0 * np.pi * x) + np.sin(4.0 * np.pi * x))
                assertions.append(_assertion(kind, defect <= atol, f"Défaut d'invariance {defect:.3g}"))
        return results, assertions, []

    def _crossing_check(self, spec, sol, seeds, N, tol, results) -> Dict[str, Any]:
        if not sol.realization:
            raise ConfigValidationError("La voie des croisements exige une réalisation géométrique",
                                        '$.realization')
        count = min(spec.get('seeds', 4), len(seeds))

        def evaluate(index):
            leaf = leaf_schwartzman_class(sol, seeds[index], N, tol, routes=('cross',))
            cross = leaf.cross_checks['cross']
            return float(np.linalg.norm(self._estimate_value(cross) - self._estimate_value(leaf)))

        gaps = parallel_map(evaluate, range(count), self.threads)
        results['crossing_route'] = {'seeds': seeds[:count], 'gaps': gaps}
        return _assertion('crossing_route', max(gaps) <= tol,
                          f"Écart max voie des croisements / feuilles {max(gaps):.3g}", gaps=gaps)

    def _run_ksolenoid(self, cfg: ExperimentConfig, out_dir: Optional[str]):
        body = cfg.body
        tols = self._tolerances(cfg)
        rng = np.random.default_rng(cfg.seed)
        alpha = float(body['alpha']) % 1.0
        wrap = body.get('wrapCell', [1.0 - alpha, 1.0])
        declared = None
        if 'declaredPhi' in body:
            desc = body['declaredPhi']
            declared = PiecewiseConstantWeight.from_descriptor(desc.get('cells', []), desc['default'])
        samples = body.get('samples', 1000)
        sol = t3_trapping_solenoid(alpha, tuple(wrap) if wrap else None, body.get('areaRoof', True), declared,
                                   samples, cfg.seed, body.get('constants'))
        rs = t3_ruelle_sullivan_class(sol)
        seeds = self._seeds(body.get('seeds'), rng)
        schedule = exhaustion_schedule(body['N'], body.get('windows', 3))
        tol = tols['convergence']
        estimates = parallel_map(
            lambda x0: k_schwartzman_class(sol, x0, schedule, tol, body.get('withCaps', False)), seeds, self.threads)
        deviations = [float(np.linalg.norm(self._estimate_value(e) - rs.coords)) for e in estimates]
        results: Dict[str, Any] = {
            'solenoid': sol.to_dict(),
            'ruelle_sullivan': rs.to_dict(),
            'seeds': seeds,
            'k_classes': [e.to_dict() for e in estimates],
            'deviations': deviations,
        }

        assertions = []
        for spec in body.get('assertions', []):
            kind = spec['type']
            atol = spec.get('tol', tol)
            if kind == 'k_classes':
                converged = all(isinstance(e, AsymptoticEstimate) for e in estimates)
                assertions.append(_assertion(kind, converged and max(deviations) <= atol,
                                             f"Écart max classes k-fenêtrées / Ruelle-Sullivan {max(deviations):.3g}"))
            elif kind == 'declared_phi':
                assertions.append(_assertion(kind, sol.checked_slabs == samples,
                                             f"{sol.checked_slabs}/{samples} tranche(s): "
                                             f"classes géométriques = déclarées",
                                             checked=sol.checked_slabs))
            elif kind == 'constants':
                check = constants_consistency(sol, samples, cfg.seed)
                results['constants_check'] = check
                assertions.append(_assertion(kind, check['success'], f"Constantes (c0, c1, c2) = "
                                             f"({check['c0']:.4g}, {check['c1']:.4g}, {check['c2']:.4g})"))
            elif kind == 'exhaustion_control':
                radii_desc = body.get('radii', {})
                base = radii_desc.get('base', 2.0)
                radii = [base ** j for j in range(1, radii_desc.get('maxExponent', 12) + 1)]
                check = exhaustion_control_check(sol, seeds[0], radii, seed=cfg.seed)
                results['exhaustion_control'] = check
                ratios = [row['ratio'] for row in check['rows'] if 'ratio' in row]
                ok = check['success'] and bool(ratios) and ratios[-1] < ratios[0]
                assertions.append(_assertion(kind, ok, f"Borne c1/c0 + 2 = {check['bound']:.4g}, "
                                             f"{len(check['violations'])} violation(s), rapports {ratios}"))
            elif kind == 'window_audit':
                audit_desc = body.get('audit', {})
                audit = random_window_audit(sol, audit_desc.get('windows', 100), audit_desc.get('maxRadius', 50.0),
                                            cfg.seed)
                results['window_audit'] = audit
                assertions.append(_assertion(kind, audit['success'],
                                             f"{audit['failures']} fenêtre(s) en violation sur {audit['windows']}"))
            elif kind == 'slab_path':
                size = spec.get('count', 16)
                ok = slab_adjacency_is_path(sol, seeds[0], -size, size)
                assertions.append(_assertion(kind, ok, f"Adjacence des {2 * size} tranches "
                                             f"{'en chemin' if ok else 'non linéaire'}"))
        return results, assertions, []

    def _run_stablenorm(self, cfg: ExperimentConfig, out_dir: Optional[str]):
        body = cfg.body
        geom = self._geometry(body)
        resolution = body.get('resolution', 16)
        force = body.get('forceGrid', False)
        n_max = body['nMax']
        solver = LoopLengthSolver(geom, resolution, force)
        estimates = {}
        artifacts = []

        def estimate(klass):
            key = tuple(int(v) for v in klass)
            if key not in estimates:
                estimates[key] = stable_norm(geom, key, n_max, threads=self.threads, solver=solver)
            return estimates[key]

        for klass in body['classes']:
            est = estimate(klass)
            if out_dir:
                filename = f'stable_norm_{_class_label(est.klass)}.csv'
                rows = [[n, length, upper, running] for n, (length, upper, running) in
                        enumerate(zip(est.lengths, est.upper_bounds, est.running_min), start=1)]
                _write_csv(os.path.join(out_dir, filename), ['n', 'l_multiple', 'upper_bound', 'running_min'], rows)
                artifacts.append(filename)
        results: Dict[str, Any] = {'geometry': geom.to_dict(), 'resolution': resolution}

        assertions = []
        for spec in body.get('assertions', []):
            kind = spec['type']
            if kind == 'expected':
                est = estimate(_require(spec, 'class', '$.assertions'))
                target = float(_require(spec, 'value', '$.assertions')[0])
                tol = spec.get('tol', 1e-12)
                gap = abs(est.value - target)
                assertions.append(_assertion(kind, gap <= tol, f"||{list(est.klass)}|| = {est.value!r} "
                                             f"(attendu {target!r}, tol {tol})", gap=gap))
            elif kind == 'homogeneity':
                klass = np.array(_require(spec, 'class', '$.assertions'))
                factor = spec.get('factor', 2)
                single, multiple = estimate(klass).value, estimate(factor * klass).value
                rel = abs(multiple - factor * single) / (factor * single)
                tol = spec.get('tol', 0.02)
                assertions.append(_assertion(kind, rel <= tol, f"||{factor}a|| = {multiple:.6f}, "
                                             f"{factor}||a|| = {factor * single:.6f}, écart relatif {rel:.3g}",
                                             relative_gap=rel))
            elif kind == 'subadditivity':
                audit = self._subadditivity(body, geom, cfg.seed, force)
                results['subadditivity'] = audit
                assertions.append(_assertion(kind, audit['success'], f"{len(audit['violations'])} violation(s) "
                                             f"sur {audit['checked']} test(s), tolérance {audit['slack']:.3g}"))
            elif kind == 'self_convergence':
                klass = _require(spec, 'class', '$.assertions')
                coarse = LoopLengthSolver(geom, resolution, force).length(klass).value
                fine = LoopLengthSolver(geom, 2 * resolution, force).length(klass).value
                rel = abs(coarse - fine) / fine
                tol = spec.get('tol', 0.01)
                results['self_convergence'] = {'class': klass, 'coarse': coarse, 'fine': fine}
                assertions.append(_assertion(kind, rel < tol, f"l(a) = {coarse:.6f} puis {fine:.6f} "
                                             f"(résolution {resolution} puis {2 * resolution})",
                                             relative_gap=rel))
            elif kind == 'lower_bound':
                bad = [list(k) for k, e in estimates.items() if e.value < e.lower_bound * (1.0 - 1e-12)]
                assertions.append(_assertion(kind, not bad, f"Estimations sous le minorant certifié: {bad}"))
            elif kind == 'strict_subadditivity':
                rows = multiple_lengths(geom, _require(spec, 'class', '$.assertions'), spec.get('N', n_max),
                                        solver=solver)
                results['multiple_lengths'] = rows
                strict = [r['n'] for r in rows if r['strict']]
                assertions.append(_assertion(kind, bool(strict), f"l(n·a) < n·l(a) pour n dans {strict}"))
        results['estimates'] = {_class_label(k): e.to_dict() for k, e in sorted(estimates.items())}
        return results, assertions, artifacts

    @staticmethod
    def _subadditivity(body, geom: TorusGeometry, seed: int, force: bool) -> Dict[str, Any]:
        desc = body.get('audit', {})
        rng = np.random.default_rng(seed)
        span = desc.get('range', 5)
        pairs = []
        while len(pairs) < desc.get('pairs', 50):
            a, b = rng.integers(-span, span + 1, (2, geom.dim))
            if np.any(a) and np.any(b) and np.any(a + b):
                pairs.append((a, b))
        multiples = [(np.array(k), 2) for k in body['classes']]
        solver = LoopLengthSolver(geom, desc.get('resolution', 8), force)
        return subadditivity_audit(geom, pairs, multiples=multiples, solver=solver)


# ==================== SUITE DE RÉFÉRENCE ====================

def list_golden(golden_dir: Optional[str] = None) -> List[Dict[str, Any]]:
    """
    Manifeste des configurations de référence.

    Returns:
        Liste d'entrées {name, config, expected_exit, description}
    """
    golden_dir = golden_dir or get_config().GOLDEN_DIR
    with open(os.path.join(golden_dir, MANIFEST_FILE), encoding='utf-8') as f:
        entries = json.load(f)
    for entry in entries:
        missing = {'name', 'config', 'expected_exit', 'description'} - set(entry)
        if missing:
            raise ConfigValidationError(f"Entrée de manifeste incomplète: {sorted(missing)}", '$')
    return entries


def run_all(golden_dir: Optional[str] = None, out_dir: Optional[str] = None,
            threads: Optional[int] = None) -> List[Dict[str, Any]]:
    """
    Exécute chaque entrée du manifeste et compare son code de sortie à l'attendu.

    Returns:
        Lignes {name, exit_code, expected_exit, ok, wall_time}
    """
    golden_dir = golden_dir or get_config().GOLDEN_DIR
    out_dir = out_dir or get_config().OUTPUT_DIR
    runner = ExperimentRunner(threads)
    rows = []
    for entry in list_golden(golden_dir):
        report = runner.run(os.path.join(golden_dir, entry['config']), os.path.join(out_dir, entry['name']))
        ok = report.exit_code == entry['expected_exit']
        rows.append({'name': entry['name'], 'exit_code': report.exit_code,
                     'expected_exit': entry['expected_exit'], 'ok': ok, 'wall_time': report.wall_time})
        if not ok:
            logger.warning(f"{entry['name']}: code {report.exit_code}, attendu {entry['expected_exit']}")
    logger.info(f"Suite de référence: {sum(r['ok'] for r in rows)}/{len(rows)} conforme(s)")
    return rows
