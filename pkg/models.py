"""
Modèles de données du laboratoire Schwartzman
Classes d'homologie, nuages de points, fenêtres et rapports
"""
import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.errors import DomainError, StructuralError


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _plain_float(x: float) -> Optional[float]:
    """Flottant sérialisable en JSON (inf/nan deviennent None)"""
    x = float(x)
    return x if math.isfinite(x) else None


def _plain_list(arr) -> List:
    return [[_plain_float(v) for v in row] for row in np.atleast_2d(arr)] if np.ndim(arr) > 1 \
        else [_plain_float(v) for v in np.ravel(arr)]


@dataclass(frozen=True, eq=False)
class HomologyVector:
    """Point de H_k(M,R) dans la base fixée du contexte"""
    coords: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.coords, float)
        if arr.ndim != 1 or arr.size < 1:
            raise StructuralError(f"Vecteur d'homologie de forme invalide: {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"Coordonnées non finies: {arr}")
        object.__setattr__(self, 'coords', arr)

    @classmethod
    def zero(cls, rank: int) -> 'HomologyVector':
        return cls(np.zeros(rank))

    @property
    def rank(self) -> int:
        return int(self.coords.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def distance(self, other: 'HomologyVector') -> float:
        if other.rank != self.rank:
            raise StructuralError(f"Rangs incompatibles: {self.rank} et {other.rank}")
        return float(np.linalg.norm(self.coords - other.coords))

    def scaled(self, factor: float) -> 'HomologyVector':
        return HomologyVector(self.coords * float(factor))

    def __eq__(self, other) -> bool:
        return isinstance(other, HomologyVector) and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        return f"HomologyVector({self.coords.tolist()})"

    def to_dict(self) -> Dict[str, Any]:
        return {'coords': [float(x) for x in self.coords]}


@dataclass(frozen=True, eq=False)
class IntegralClass:
    """Classe entière de H_k(M,Z), plongée sans perte dans H_k(M,R)"""
    coords: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.coords)
        if raw.ndim != 1 or raw.size < 1:
            raise StructuralError(f"Classe entière de forme invalide: {raw.shape}")
        if raw.dtype.kind == 'f':
            if not np.all(np.isfinite(raw)) or not np.array_equal(raw, np.round(raw)):
                raise DomainError(f"Coordonnées non entières: {raw}")
        object.__setattr__(self, 'coords', _frozen(raw, np.int64))

    @property
    def rank(self) -> int:
        return int(self.coords.size)

    def is_zero(self) -> bool:
        return not np.any(self.coords)

    def to_vector(self) -> HomologyVector:
        return HomologyVector(self.coords.astype(float))

    def __eq__(self, other) -> bool:
        return isinstance(other, IntegralClass) and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        return f"IntegralClass({self.coords.tolist()})"

    def to_dict(self) -> Dict[str, Any]:
        return {'coords': [int(x) for x in self.coords]}


@dataclass(frozen=True, eq=False)
class PointSet:
    """Échantillon fini d'un ensemble dérivé, avec provenance (s, t) optionnelle"""
    points: np.ndarray
    provenance: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2:
            raise StructuralError(f"Nuage de points de forme invalide: {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DomainError("Nuage de points non fini")
        pts.setflags(write=False)
        object.__setattr__(self, 'points', pts)
        if self.provenance is not None:
            prov = np.array(self.provenance, dtype=float)
            if prov.shape != (pts.shape[0], 2):
                raise StructuralError(f"Provenance de forme {prov.shape}, attendu {(pts.shape[0], 2)}")
            prov.setflags(write=False)
            object.__setattr__(self, 'provenance', prov)

    @classmethod
    def from_vectors(cls, vectors: Sequence[HomologyVector], provenance=None,
                     rank: Optional[int] = None) -> 'PointSet':
        if not vectors:
            if rank is None:
                raise DomainError("Rang requis pour un nuage vide")
            return cls(np.zeros((0, rank)), None if provenance is None else np.zeros((0, 2)))
        ranks = {v.rank for v in vectors}
        if len(ranks) != 1:
            raise StructuralError(f"Rangs mélangés dans le nuage: {sorted(ranks)}")
        return cls(np.vstack([v.coords for v in vectors]), provenance)

    @classmethod
    def empty(cls, rank: int) -> 'PointSet':
        return cls(np.zeros((0, rank)))

    @property
    def rank(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def is_empty(self) -> bool:
        return len(self) == 0

    def vectors(self) -> List[HomologyVector]:
        return [HomologyVector(p) for p in self.points]

    def duplicate_mask(self) -> np.ndarray:
        """Vrai pour chaque point identique à un point antérieur"""
        seen = set()
        mask = np.zeros(len(self), dtype=bool)
        for i, row in enumerate(self.points):
            key = row.tobytes()
            mask[i] = key in seen
            seen.add(key)
        return mask

    @property
    def has_duplicates(self) -> bool:
        return bool(self.duplicate_mask().any())

    def subset(self, mask) -> 'PointSet':
        mask = np.asarray(mask)
        prov = None if self.provenance is None else self.provenance[mask]
        return PointSet(self.points[mask], prov)

    def union(self, other: 'PointSet') -> 'PointSet':
        if other.rank != self.rank:
            raise StructuralError(f"Rangs incompatibles: {self.rank} et {other.rank}")
        if self.provenance is None and other.provenance is None:
            prov = None
        else:
            prov = np.vstack([
                self.provenance if self.provenance is not None else np.full((len(self), 2), np.nan),
                other.provenance if other.provenance is not None else np.full((len(other), 2), np.nan),
            ])
        return PointSet(np.vstack([self.points, other.points]), prov)

    def to_csv(self, path: str) -> None:
        """Une ligne par point: coord_0..coord_{r-1}, s, t (vides si absents)"""
        header = [f'coord_{i}' for i in range(self.rank)] + ['s', 't']
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for i, row in enumerate(self.points):
                prov = ['', '']
                if self.provenance is not None:
                    prov = ['' if math.isnan(v) else repr(float(v)) for v in self.provenance[i]]
                writer.writerow([repr(float(v)) for v in row] + prov)

    @classmethod
    def from_csv(cls, path: str) -> 'PointSet':
        with open(path, newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            header = next(reader)
            rank = sum(1 for h in header if h.startswith('coord_'))
            points, prov, any_prov = [], [], False
            for row in reader:
                points.append([float(v) for v in row[:rank]])
                st = [float(v) if v != '' else math.nan for v in row[rank:rank + 2]]
                any_prov = any_prov or not all(math.isnan(v) for v in st)
                prov.append(st)
        if not points:
            return cls.empty(rank)
        return cls(np.array(points), np.array(prov) if any_prov else None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rank': self.rank,
            'size': len(self),
            'duplicates': int(self.duplicate_mask().sum()),
        }


@dataclass(frozen=True)
class ClosingPath:
    """Segment de fermeture entre relevés de deux points du tore"""
    points: np.ndarray
    length: float
    flat_length: float

    @property
    def displacement(self) -> np.ndarray:
        return self.points[-1] - self.points[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'points': _plain_list(self.points),
            'length': _plain_float(self.length),
            'flat_length': _plain_float(self.flat_length),
        }


@dataclass(frozen=True)
class WindowSchedule:
    """Suite de fenêtres (s, t) dont la longueur t - s croît strictement"""
    windows: Tuple[Tuple[float, float], ...]
    rule: str = 'explicit'

    def __post_init__(self):
        wins = tuple((float(s), float(t)) for s, t in self.windows)
        if not wins:
            raise DomainError("Calendrier de fenêtres vide")
        for s, t in wins:
            if not (math.isfinite(s) and math.isfinite(t)) or not s < t:
                raise DomainError(f"Fenêtre invalide: ({s}, {t})")
        spans = [t - s for s, t in wins]
        if any(b <= a for a, b in zip(spans, spans[1:])):
            raise DomainError("Les longueurs t - s doivent croître strictement")
        object.__setattr__(self, 'windows', wins)

    @classmethod
    def geometric(cls, max_span: float, count: int, ratio: float = 2.0) -> 'WindowSchedule':
        """Fenêtres symétriques (-L/2, L/2) avec L = max_span * ratio^(j - count + 1)"""
        if count < 1 or ratio <= 1.0:
            raise DomainError(f"Calendrier géométrique invalide: count={count}, ratio={ratio}")
        spans = [max_span * ratio ** (j - count + 1) for j in range(count)]
        return cls(tuple((-L / 2.0, L / 2.0) for L in spans), 'geometric')

    @classmethod
    def independent(cls, s0: float, t0: float, count: int, ratio: float = 2.0) -> 'WindowSchedule':
        """t_j = t0 * ratio^j et s_j = -s0 * ratio^j"""
        if count < 1 or ratio <= 1.0 or s0 < 0 or t0 < 0 or s0 + t0 <= 0:
            raise DomainError(f"Calendrier invalide: s0={s0}, t0={t0}, count={count}")
        return cls(tuple((-s0 * ratio ** j, t0 * ratio ** j) for j in range(count)), 'independent')

    @classmethod
    def linear(cls, max_span: float, count: int) -> 'WindowSchedule':
        if count < 1:
            raise DomainError(f"Calendrier linéaire invalide: count={count}")
        return cls(tuple((-L / 2.0, L / 2.0)
                         for L in (max_span * (j + 1) / count for j in range(count))), 'linear')

    @classmethod
    def explicit(cls, pairs: Sequence[Tuple[float, float]]) -> 'WindowSchedule':
        return cls(tuple(pairs), 'explicit')

    @property
    def spans(self) -> np.ndarray:
        return np.array([t - s for s, t in self.windows])

    @property
    def starts(self) -> np.ndarray:
        return np.array([s for s, _ in self.windows])

    @property
    def ends(self) -> np.ndarray:
        return np.array([t for _, t in self.windows])

    def positive_side(self) -> 'WindowSchedule':
        """Fenêtres (0, t_j) pour [c+]"""
        if np.any(self.ends <= 0):
            raise DomainError("Les fins de fenêtre doivent être positives")
        return WindowSchedule(tuple((0.0, t) for t in self.ends), 'positive')

    def negative_side(self) -> 'WindowSchedule':
        """Fenêtres (s_j, 0) pour [c-]"""
        if np.any(self.starts >= 0):
            raise DomainError("Les débuts de fenêtre doivent être négatifs")
        return WindowSchedule(tuple((s, 0.0) for s in self.starts), 'negative')

    def scaled(self, factor: float) -> 'WindowSchedule':
        return WindowSchedule(tuple((s * factor, t * factor) for s, t in self.windows), self.rule)

    def to_dict(self) -> Dict[str, Any]:
        return {'rule': self.rule, 'windows': [[s, t] for s, t in self.windows]}


@dataclass(frozen=True)
class WindowGrid:
    """Grille produit de débuts s < 0 et de fins t > 0 pour le balayage des amas"""
    starts: Tuple[float, ...]
    ends: Tuple[float, ...]

    def __post_init__(self):
        starts = tuple(sorted(float(s) for s in self.starts))
        ends = tuple(sorted(float(t) for t in self.ends))
        if not starts or not ends:
            raise DomainError("Grille de fenêtres vide")
        if starts[-1] >= 0 or ends[0] <= 0:
            raise DomainError("La grille exige s < 0 < t")
        object.__setattr__(self, 'starts', starts)
        object.__setattr__(self, 'ends', ends)

    @classmethod
    def geometric(cls, s0: float, t0: float, count: int, ratio: float = 2.0) -> 'WindowGrid':
        return cls(tuple(-s0 * ratio ** j for j in range(count)),
                   tuple(t0 * ratio ** j for j in range(count)))

    def decades(self) -> Tuple[float, float]:
        """Nombre de décennies couvertes par |s| et par t"""
        s = np.abs(np.array(self.starts))
        t = np.array(self.ends)
        return float(np.log10(s.max() / s.min())), float(np.log10(t.max() / t.min()))

    def to_dict(self) -> Dict[str, Any]:
        return {'starts': list(self.starts), 'ends': list(self.ends)}


@dataclass(frozen=True)
class ConeReport:
    """Rayons issus de l'agrégation angulaire d'un nuage"""
    rays: np.ndarray
    counts: Tuple[int, ...]
    zero_count: int
    angular_tol: float

    @property
    def zero_flag(self) -> bool:
        return self.zero_count > 0

    @property
    def ray_count(self) -> int:
        return int(self.rays.shape[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rays': _plain_list(self.rays) if self.ray_count else [],
            'counts': list(self.counts),
            'zero_count': self.zero_count,
            'zero_flag': self.zero_flag,
            'angular_tol': self.angular_tol,
        }


@dataclass
class AsymptoticEstimate:
    """Estimation d'une classe asymptotique par une voie de calcul"""
    value: HomologyVector
    route: str
    residual: float
    converged: bool
    windows: Tuple[Tuple[float, float], ...] = ()
    window_values: Optional[np.ndarray] = None
    rejected: List[Dict[str, Any]] = field(default_factory=list)
    positive: Optional[HomologyVector] = None
    negative: Optional[HomologyVector] = None
    cross_checks: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'converged': self.converged,
            'residual': _plain_float(self.residual),
            'route': self.route,
            'value': self.value.to_dict()['coords'],
            'windows_used': len(self.windows),
            'rejected': self.rejected,
        }
        if self.positive is not None:
            data['positive'] = self.positive.to_dict()['coords']
        if self.negative is not None:
            data['negative'] = self.negative.to_dict()['coords']
        if self.cross_checks:
            data['cross_checks'] = {k: v.to_dict() for k, v in self.cross_checks.items()}
        return data


@dataclass
class NotConvergent:
    """Diagnostic de non-convergence (valeur retournée, pas une exception)"""
    route: str
    diameter: float
    last_values: np.ndarray
    message: str = ''
    positive: Optional[HomologyVector] = None
    negative: Optional[HomologyVector] = None
    joint: Optional[HomologyVector] = None
    cone: Optional[ConeReport] = None
    cross_checks: Dict[str, Any] = field(default_factory=dict)

    converged = False

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'converged': False,
            'diameter': _plain_float(self.diameter),
            'last_values': _plain_list(self.last_values),
            'message': self.message,
            'route': self.route,
        }
        for name in ('positive', 'negative', 'joint'):
            value = getattr(self, name)
            if value is not None:
                data[name] = value.to_dict()['coords']
        if self.cone is not None:
            data['cone'] = self.cone.to_dict()
        if self.cross_checks:
            data['cross_checks'] = {k: v.to_dict() for k, v in self.cross_checks.items()}
        return data


@dataclass
class ClusterEstimate:
    """Échantillons finis de C(c), C+(c), C-(c) et Cb(c)"""
    full: PointSet
    positive: PointSet
    negative: PointSet
    balanced: PointSet
    positive_stable: np.ndarray
    negative_stable: np.ndarray
    balance_span: float

    def stable_positive(self) -> PointSet:
        return self.positive.subset(self.positive_stable)

    def stable_negative(self) -> PointSet:
        return self.negative.subset(self.negative_stable)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'balance_span': self.balance_span,
            'balanced': self.balanced.to_dict(),
            'full': self.full.to_dict(),
            'negative': self.negative.to_dict(),
            'negative_stable': int(np.sum(self.negative_stable)),
            'positive': self.positive.to_dict(),
            'positive_stable': int(np.sum(self.positive_stable)),
        }


@dataclass
class LoopLengthResult:
    """Longueur minimale l(a) d'un lacet de classe a"""
    klass: Tuple[int, ...]
    value: float
    method: str
    upper: float
    lower: Optional[float] = None
    resolution: Optional[int] = None
    polyline: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class': list(self.klass),
            'lower': _plain_float(self.lower) if self.lower is not None else None,
            'method': self.method,
            'resolution': self.resolution,
            'upper': _plain_float(self.upper),
            'value': _plain_float(self.value),
        }


@dataclass
class StableNormEstimate:
    """Norme stable ||a|| par minimum courant de l(n.a)/n"""
    klass: Tuple[int, ...]
    value: float
    lengths: List[float]
    upper_bounds: List[float]
    running_min: List[float]
    n_used: int
    C0: float
    lower_bound: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'C0': _plain_float(self.C0),
            'class': list(self.klass),
            'lengths': [_plain_float(v) for v in self.lengths],
            'lower_bound': _plain_float(self.lower_bound),
            'n_used': self.n_used,
            'running_min': [_plain_float(v) for v in self.running_min],
            'upper_bounds': [_plain_float(v) for v in self.upper_bounds],
            'value': _plain_float(self.value),
        }


@dataclass
class MeasuredClassReport:
    """Classe de Ruelle-Sullivan et classes des feuilles échantillonnées"""
    rs_class: HomologyVector
    normalization: float
    seeds: List[float]
    leaf_classes: List[Any]
    max_deviation: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'leaf_classes': [leaf.to_dict() for leaf in self.leaf_classes],
            'max_deviation': _plain_float(self.max_deviation),
            'normalization': _plain_float(self.normalization),
            'rs_class': self.rs_class.to_dict()['coords'],
            'seeds': list(self.seeds),
        }


@dataclass(frozen=True)
class ExhaustionWindow:
    """Union de tranches U_{a,b}, indices a <= 0 < b"""
    a: int
    b: int

    def __post_init__(self):
        if not self.a <= 0 < self.b:
            raise DomainError(f"Fenêtre d'exhaustion invalide: ({self.a}, {self.b})")

    @property
    def size(self) -> int:
        return self.b - self.a

    def to_dict(self) -> Dict[str, Any]:
        return {'a': self.a, 'b': self.b}


@dataclass
class ExperimentConfig:
    """Configuration validée d'une expérience"""
    schema_version: int
    subcommand: str
    seed: int
    body: Dict[str, Any]
    raw: Dict[str, Any]


@dataclass
class Report:
    """Rapport d'expérience; wall_time est le seul champ non déterministe"""
    config: Dict[str, Any]
    results: Dict[str, Any]
    assertions: List[Dict[str, Any]]
    exit_code: int
    wall_time: float = 0.0
    schema_version: int = 1
    artifacts: List[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.exit_code == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'artifacts': list(self.artifacts),
            'assertions': self.assertions,
            'config': self.config,
            'exit_code': self.exit_code,
            'results': self.results,
            'schema_version': self.schema_version,
            'wall_time': self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False,
                          default=_json_default)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Type non sérialisable: {type(value).__name__}")
