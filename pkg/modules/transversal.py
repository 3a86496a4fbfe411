"""
Systèmes dynamiques transverses (application de retour R, mesure invariante μ)
et fonctions de poids sur la transversale
"""
import bisect
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import get_config
from modules.errors import DomainError, StructuralError
from modules.torus_geometry import TrigPolynomial

logger = logging.getLogger(__name__)

ODOMETER_BITS = 62
ODOMETER_MODULUS = 1 << ODOMETER_BITS


class TransversalSystem:
    """
    Transversale X ≅ [0, 1) (coordonnée), application de retour R et mesure μ.
    Les états internes peuvent différer de la coordonnée (entiers pour l'odomètre).
    """
    kind = 'abstract'
    ergodic = True
    uniquely_ergodic = True

    def __init__(self, measure_scale: float = 1.0):
        if not measure_scale > 0:
            raise DomainError(f"Facteur de mesure non positif: {measure_scale}")
        self.measure_scale = float(measure_scale)

    def seed_state(self, seed: float):
        return float(seed) % 1.0

    def orbit(self, state, N: int) -> np.ndarray:
        """États x, R(x), ..., R^{N-1}(x)"""
        raise NotImplementedError

    def backward_orbit(self, state, N: int) -> np.ndarray:
        """États R^{-1}(x), ..., R^{-N}(x)"""
        raise NotImplementedError

    def coordinates(self, states) -> np.ndarray:
        return np.asarray(states, dtype=float)

    def apply(self, coords: np.ndarray) -> np.ndarray:
        """R agissant sur les coordonnées (vectorisé, pour les quadratures)"""
        raise NotImplementedError

    def interval_measure(self, a: float, b: float) -> float:
        """μ([a, b)) en coordonnées"""
        lo, hi = max(0.0, a), min(1.0, b)
        return self.measure_scale * max(0.0, hi - lo)

    def quadrature_nodes(self, resolution: int = 4096) -> Tuple[np.ndarray, np.ndarray]:
        """Nœuds et poids d'intégration contre μ (point milieu par défaut)"""
        nodes = (np.arange(resolution) + 0.5) / resolution
        return nodes, np.full(resolution, self.measure_scale / resolution)

    @property
    def total_mass(self) -> float:
        return self.interval_measure(0.0, 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {'type': self.kind, 'ergodic': self.ergodic,
                'uniquely_ergodic': self.uniquely_ergodic, 'measure_scale': self.measure_scale}


class CircleRotation(TransversalSystem):
    """Rotation x -> x + α mod 1 avec la mesure de Lebesgue"""
    kind = 'rotation'

    def __init__(self, alpha: float, measure_scale: float = 1.0):
        super().__init__(measure_scale)
        self.alpha = float(alpha) % 1.0
        rational = Fraction(self.alpha).limit_denominator(10 ** 12)
        if abs(float(rational) - self.alpha) == 0.0 and rational.denominator < 10 ** 6:
            self.ergodic = self.uniquely_ergodic = False

    def orbit(self, state, N: int) -> np.ndarray:
        return np.mod(float(state) + np.arange(N) * self.alpha, 1.0)

    def backward_orbit(self, state, N: int) -> np.ndarray:
        return np.mod(float(state) - np.arange(1, N + 1) * self.alpha, 1.0)

    def apply(self, coords: np.ndarray) -> np.ndarray:
        return np.mod(coords + self.alpha, 1.0)

    def near_rational(self, N: int) -> Optional[Fraction]:
        """p/q avec q <= √N et N·|α - p/q| < 1/q: α indiscernable d'un rationnel à l'échelle N"""
        q_max = max(1, int(math.isqrt(max(1, N))))
        approx = Fraction(self.alpha).limit_denominator(q_max)
        if N * abs(self.alpha - float(approx)) < 1.0 / approx.denominator:
            return approx
        return None

    def to_dict(self) -> Dict[str, Any]:
        return dict(super().to_dict(), alpha=self.alpha)


class IntervalExchange(TransversalSystem):
    """
    Échange d'intervalles: l'intervalle i (dans l'ordre) est translaté en position permutation[i]
    """
    kind = 'iet'

    def __init__(self, lengths: Sequence[float], permutation: Sequence[int], measure_scale: float = 1.0):
        super().__init__(measure_scale)
        lam = np.array(lengths, dtype=float)
        perm = [int(p) for p in permutation]
        if lam.size < 2 or np.any(lam <= 0):
            raise DomainError("Longueurs d'échange d'intervalles invalides")
        if sorted(perm) != list(range(lam.size)):
            raise DomainError(f"Permutation invalide: {perm}")
        lam = lam / lam.sum()
        self.lengths = lam
        self.permutation = perm
        self.starts = np.concatenate([[0.0], np.cumsum(lam)[:-1]])
        order = sorted(range(lam.size), key=lambda i: perm[i])
        images = np.zeros(lam.size)
        position = 0.0
        for i in order:
            images[i] = position
            position += lam[i]
        self.image_starts = images
        self.translations = images - self.starts
        self._bounds = list(self.starts[1:])
        inverse_order = np.argsort(images)
        self._image_bounds = list(images[inverse_order][1:])
        self._inverse_order = inverse_order

    def _step(self, x: float) -> float:
        i = bisect.bisect_right(self._bounds, x)
        return min(max(x + self.translations[i], 0.0), math.nextafter(1.0, 0.0))

    def _step_back(self, x: float) -> float:
        i = self._inverse_order[bisect.bisect_right(self._image_bounds, x)]
        return min(max(x - self.translations[i], 0.0), math.nextafter(1.0, 0.0))

    def orbit(self, state, N: int) -> np.ndarray:
        out = np.empty(N)
        x = float(state)
        for i in range(N):
            out[i] = x
            x = self._step(x)
        return out

    def backward_orbit(self, state, N: int) -> np.ndarray:
        out = np.empty(N)
        x = float(state)
        for i in range(N):
            x = self._step_back(x)
            out[i] = x
        return out

    def apply(self, coords: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.starts, coords, side='right') - 1
        return coords + self.translations[idx]

    def to_dict(self) -> Dict[str, Any]:
        return dict(super().to_dict(), lengths=self.lengths.tolist(), permutation=self.permutation)


class Odometer(TransversalSystem):
    """
    Odomètre dyadique (machine à additionner) sur Z_2 avec la mesure de Bernoulli uniforme.
    États entiers modulo 2^62; coordonnée de van der Corput (chiffres renversés).
    """
    kind = 'odometer'

    def __init__(self, depth: Optional[int] = None, measure_scale: float = 1.0):
        super().__init__(measure_scale)
        self.depth = get_config().ODOMETER_DEPTH if depth is None else int(depth)
        if not 1 <= self.depth <= 52:
            raise DomainError(f"Profondeur de cylindres invalide: {self.depth}")

    def seed_state(self, seed: float) -> int:
        """Les chiffres binaires de la graine deviennent les chiffres 2-adiques de l'état"""
        x = float(seed) % 1.0
        state = 0
        for i in range(53):
            x *= 2.0
            bit = int(x)
            x -= bit
            state |= bit << i
        return state

    def orbit(self, state, N: int) -> np.ndarray:
        base = np.uint64(int(state) % ODOMETER_MODULUS)
        steps = np.arange(N, dtype=np.uint64)
        return (base + steps) & np.uint64(ODOMETER_MODULUS - 1)

    def backward_orbit(self, state, N: int) -> np.ndarray:
        base = np.uint64(int(state) % ODOMETER_MODULUS)
        steps = np.arange(1, N + 1, dtype=np.uint64)
        return (base - steps) & np.uint64(ODOMETER_MODULUS - 1)

    def coordinates(self, states) -> np.ndarray:
        s = np.asarray(states, dtype=np.uint64)
        out = np.zeros(s.shape)
        for i in range(53):
            out += ((s >> np.uint64(i)) & np.uint64(1)).astype(float) * 2.0 ** -(i + 1)
        return out

    def _states_from_coordinates(self, coords: np.ndarray) -> np.ndarray:
        x = np.asarray(coords, dtype=float).copy()
        state = np.zeros(x.shape, dtype=np.uint64)
        for i in range(53):
            x *= 2.0
            bit = np.floor(x)
            x -= bit
            state |= bit.astype(np.uint64) << np.uint64(i)
        return state

    def apply(self, coords: np.ndarray) -> np.ndarray:
        return self.coordinates(self._states_from_coordinates(coords) + np.uint64(1))

    def interval_measure(self, a: float, b: float) -> float:
        """Mesure tronquée aux cylindres de profondeur depth (exacte sur les cylindres)"""
        scale = 2 ** self.depth
        lo = math.ceil(max(0.0, a) * scale)
        hi = math.ceil(min(1.0, b) * scale)
        return self.measure_scale * max(0, hi - lo) / scale

    def quadrature_nodes(self, resolution: int = 4096) -> Tuple[np.ndarray, np.ndarray]:
        cells = 2 ** min(self.depth, 16)
        nodes = (np.arange(cells) + 0.5) / cells
        return nodes, np.full(cells, self.measure_scale / cells)

    def to_dict(self) -> Dict[str, Any]:
        return dict(super().to_dict(), depth=self.depth)


class FiniteSystem(TransversalSystem):
    """Permutation d'atomes k = 0..m-1 (coordonnée (k + 1/2)/m) avec poids invariants"""
    kind = 'finite'

    def __init__(self, permutation: Sequence[int], weights: Optional[Sequence[float]] = None,
                 measure_scale: float = 1.0):
        super().__init__(measure_scale)
        perm = [int(p) for p in permutation]
        m = len(perm)
        if m < 1 or sorted(perm) != list(range(m)):
            raise DomainError(f"Permutation invalide: {perm}")
        w = np.full(m, 1.0 / m) if weights is None else np.array(weights, dtype=float)
        if w.shape != (m,) or np.any(w < 0) or w.sum() <= 0:
            raise DomainError("Poids atomiques invalides")
        if not np.allclose(w[perm], w, rtol=0.0, atol=1e-12):
            raise DomainError("Poids non invariants par la permutation")
        self.permutation = np.array(perm)
        self.inverse = np.argsort(self.permutation)
        self.weights = w / w.sum()
        self.cycles = self._cycles()
        charged = [c for c in self.cycles if self.weights[c[0]] > 0]
        self.ergodic = len(charged) == 1
        self.uniquely_ergodic = len(self.cycles) == 1

    def _cycles(self) -> List[List[int]]:
        seen, cycles = set(), []
        for start in range(self.permutation.size):
            if start in seen:
                continue
            cycle, k = [], start
            while k not in seen:
                seen.add(k)
                cycle.append(k)
                k = int(self.permutation[k])
            cycles.append(cycle)
        return cycles

    @property
    def size(self) -> int:
        return int(self.permutation.size)

    def seed_state(self, seed: float) -> int:
        if isinstance(seed, (int, np.integer)):
            return int(seed) % self.size
        return int(math.floor((float(seed) % 1.0) * self.size))

    def orbit(self, state, N: int) -> np.ndarray:
        out = np.empty(N, dtype=np.int64)
        k = int(state)
        for i in range(N):
            out[i] = k
            k = int(self.permutation[k])
        return out

    def backward_orbit(self, state, N: int) -> np.ndarray:
        out = np.empty(N, dtype=np.int64)
        k = int(state)
        for i in range(N):
            k = int(self.inverse[k])
            out[i] = k
        return out

    def coordinates(self, states) -> np.ndarray:
        return (np.asarray(states, dtype=float) + 0.5) / self.size

    def apply(self, coords: np.ndarray) -> np.ndarray:
        k = np.floor(np.asarray(coords) * self.size).astype(int)
        return self.coordinates(self.permutation[np.clip(k, 0, self.size - 1)])

    def interval_measure(self, a: float, b: float) -> float:
        c = self.coordinates(np.arange(self.size))
        return self.measure_scale * float(self.weights[(c >= a) & (c < b)].sum())

    def quadrature_nodes(self, resolution: int = 4096) -> Tuple[np.ndarray, np.ndarray]:
        return self.coordinates(np.arange(self.size)), self.measure_scale * self.weights

    def period(self, state) -> int:
        for cycle in self.cycles:
            if int(state) in cycle:
                return len(cycle)
        raise DomainError(f"État inconnu: {state}")

    def to_dict(self) -> Dict[str, Any]:
        return dict(super().to_dict(), permutation=self.permutation.tolist(),
                    weights=self.weights.tolist())


def system_from_descriptor(descriptor: Dict[str, Any]) -> TransversalSystem:
    """Construit une base depuis {"type": "rotation"|"iet"|"odometer"|"finite", ...}"""
    kind = descriptor['type']
    scale = float(descriptor.get('measure_scale', 1.0))
    if kind == 'rotation':
        return CircleRotation(float(descriptor['alpha']), scale)
    if kind == 'iet':
        return IntervalExchange(descriptor['lengths'], descriptor['permutation'], scale)
    if kind == 'odometer':
        return Odometer(descriptor.get('depth'), scale)
    if kind == 'finite':
        return FiniteSystem(descriptor['permutation'], descriptor.get('weights'), scale)
    raise DomainError(f"Base transverse inconnue: {kind}")


@dataclass(frozen=True, eq=False)
class PiecewiseConstantWeight:
    """Fonction constante sur des cellules [lo, hi) disjointes, valeur par défaut ailleurs"""
    cells: Tuple[Tuple[float, float], ...]
    values: np.ndarray
    default: np.ndarray

    def __post_init__(self):
        cells = tuple((float(lo), float(hi)) for lo, hi in self.cells)
        values = np.atleast_2d(np.array(self.values, dtype=float)) if cells else \
            np.zeros((0, np.size(self.default)))
        default = np.array(self.default, dtype=float).reshape(-1)
        if values.shape != (len(cells), default.size):
            raise StructuralError("Valeurs de cellules de rang incompatible avec la valeur par défaut")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(default))):
            raise DomainError("Poids non intégrable (valeurs non finies)")
        ordered = sorted(cells)
        for lo, hi in ordered:
            if not 0.0 <= lo < hi <= 1.0:
                raise DomainError(f"Cellule invalide: [{lo}, {hi})")
        for (_, hi), (lo, _) in zip(ordered, ordered[1:]):
            if lo < hi:
                raise DomainError("Cellules non disjointes")
        values.setflags(write=False)
        default.setflags(write=False)
        object.__setattr__(self, 'cells', cells)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'default', default)

    @classmethod
    def constant(cls, value) -> 'PiecewiseConstantWeight':
        return cls((), np.zeros((0, np.size(value))), np.atleast_1d(np.array(value, dtype=float)))

    @classmethod
    def from_descriptor(cls, items: Sequence[Dict[str, Any]], default) -> 'PiecewiseConstantWeight':
        return cls(tuple(tuple(item['cell']) for item in items),
                   np.array([item['class'] for item in items], dtype=float).reshape(len(items), -1)
                   if items else np.zeros((0, len(default))),
                   np.array(default, dtype=float))

    @property
    def rank(self) -> int:
        return int(self.default.size)

    @property
    def is_integral(self) -> bool:
        return bool(np.array_equal(self.values, np.round(self.values))
                    and np.array_equal(self.default, np.round(self.default)))

    def __call__(self, coords) -> np.ndarray:
        x = np.atleast_1d(np.asarray(coords, dtype=float))
        out = np.broadcast_to(self.default, (x.size, self.rank)).copy()
        for (lo, hi), value in zip(self.cells, self.values):
            out[(x >= lo) & (x < hi)] = value
        return out

    def interval_integral(self, system: TransversalSystem, a: float, b: float) -> np.ndarray:
        """∫_{[a,b)} w dμ par sommes exactes de mesures de cellules"""
        if isinstance(system, FiniteSystem):
            nodes, weights = system.quadrature_nodes()
            inside = (nodes >= a) & (nodes < b)
            return weights[inside] @ self(nodes[inside]) if inside.any() else np.zeros(self.rank)
        total = self.default * system.interval_measure(a, b)
        for (lo, hi), value in zip(self.cells, self.values):
            total = total + (value - self.default) * system.interval_measure(max(a, lo), min(b, hi))
        return total

    def integral(self, system: TransversalSystem) -> np.ndarray:
        return self.interval_integral(system, 0.0, 1.0)

    def bounds(self) -> Tuple[float, float]:
        """inf et sup de la première coordonnée (usage: toits)"""
        values = np.concatenate([self.values[:, 0], self.default[:1]])
        return float(values.min()), float(values.max())

    def to_dict(self) -> Dict[str, Any]:
        return {'cells': [list(c) for c in self.cells], 'values': self.values.tolist(),
                'default': self.default.tolist()}


@dataclass(frozen=True, eq=False)
class TrigWeight:
    """Poids scalaire donné par un polynôme trigonométrique d'une variable"""
    poly: TrigPolynomial

    def __post_init__(self):
        if self.poly.dim != 1:
            raise StructuralError("Un toit trigonométrique est une fonction d'une variable")

    @classmethod
    def from_terms(cls, terms: Sequence[Dict[str, Any]]) -> 'TrigWeight':
        return cls(TrigPolynomial.from_terms(1, terms))

    @property
    def rank(self) -> int:
        return 1

    def __call__(self, coords) -> np.ndarray:
        x = np.atleast_1d(np.asarray(coords, dtype=float))
        return self.poly.value(x[:, None])[:, None]

    def interval_integral(self, system: TransversalSystem, a: float, b: float) -> np.ndarray:
        if isinstance(system, FiniteSystem):
            nodes, weights = system.quadrature_nodes()
            inside = (nodes >= a) & (nodes < b)
            return np.array([float(weights[inside] @ self(nodes[inside])[:, 0])]) if inside.any() \
                else np.zeros(1)
        lo, hi = max(0.0, a), min(1.0, b)
        if hi <= lo:
            return np.zeros(1)
        return np.array([system.measure_scale * self.poly.interval_integral(lo, hi)])

    def integral(self, system: TransversalSystem) -> np.ndarray:
        return self.interval_integral(system, 0.0, 1.0)

    def bounds(self) -> Tuple[float, float]:
        grid = (np.arange(4096) + 0.5) / 4096
        values = self(grid)[:, 0]
        return float(values.min()), float(values.max())

    def to_dict(self) -> Dict[str, Any]:
        return self.poly.to_dict()


def roof_from_descriptor(descriptor) -> Any:
    """Toit: nombre (constant), {"cells": [...], "default": v} ou {"trig": [termes]}"""
    if isinstance(descriptor, (int, float)):
        return PiecewiseConstantWeight.constant([float(descriptor)])
    if 'trig' in descriptor:
        return TrigWeight.from_terms(descriptor['trig'])
    items = [{'cell': c['cell'], 'class': [c['value']]} for c in descriptor.get('cells', [])]
    return PiecewiseConstantWeight.from_descriptor(items, [float(descriptor['default'])])


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Mesure atomique finie Σ w_k δ_{x_k} sur la coordonnée transverse"""
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.array(self.atoms, dtype=float).reshape(-1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if x.size != w.size or x.size == 0:
            raise DomainError("Atomes et poids de tailles différentes ou vides")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("Poids atomiques négatifs ou non finis")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, 'atoms', x)
        object.__setattr__(self, 'weights', w)

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def integrate(self, weight) -> np.ndarray:
        return self.weights @ weight(self.atoms)

    def interval_measure(self, a: float, b: float) -> float:
        return float(self.weights[(self.atoms >= a) & (self.atoms < b)].sum())

    def scaled(self, factor: float) -> 'AtomicMeasure':
        return AtomicMeasure(self.atoms, self.weights * factor)

    def combined(self, other: 'AtomicMeasure') -> 'AtomicMeasure':
        return AtomicMeasure(np.concatenate([self.atoms, other.atoms]),
                             np.concatenate([self.weights, other.weights]))

    def to_dict(self) -> Dict[str, Any]:
        return {'atoms': self.atoms.tolist(), 'weights': self.weights.tolist()}


@dataclass
class BirkhoffResult:
    """Moyenne de Birkhoff et écart entre les deux derniers blocs dyadiques"""
    value: np.ndarray
    tail: float
    N: int

    def to_dict(self) -> Dict[str, Any]:
        return {'value': np.atleast_1d(self.value).tolist(), 'tail': self.tail, 'N': self.N}


def birkhoff_average(system: TransversalSystem, weight, x0, N: int) -> BirkhoffResult:
    """
    (1/N)·Σ_{i<N} w(R^i x0), sommée coordonnée par coordonnée avec fsum.

    Args:
        system: Base transverse
        weight: Fonction coordonnées -> valeurs (N, r)
        x0: Graine (coordonnée dans [0, 1) ou état)
        N: Nombre d'itérés (>= 1)

    Returns:
        BirkhoffResult (tail = |A_N - A_{N/2}|)
    """
    if N < 1:
        raise DomainError(f"N doit être >= 1, reçu {N}")
    values = weight(system.coordinates(system.orbit(system.seed_state(x0), N)))
    full = _block_mean(values, N)
    half = _block_mean(values, max(1, N // 2))
    return BirkhoffResult(full, float(np.linalg.norm(full - half)), N)


def _block_mean(values: np.ndarray, n: int) -> np.ndarray:
    return np.array([math.fsum(values[:n, j]) for j in range(values.shape[1])]) / n


def invariance_defect(system: TransversalSystem, h, resolution: int = 4096) -> float:
    """|∫ h∘R dμ - ∫ h dμ| par quadrature (h: coordonnées -> valeurs réelles)"""
    nodes, weights = system.quadrature_nodes(resolution)
    before = math.fsum(weights * np.asarray(h(nodes), dtype=float))
    after = math.fsum(weights * np.asarray(h(system.apply(nodes)), dtype=float))
    return abs(after - before)
