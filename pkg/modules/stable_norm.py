"""
Longueur minimale des lacets par classe entière et norme stable
Cas plat exact, plus courts chemins sur grille relevée (Dijkstra) sinon
"""
import itertools
import logging
import math
import threading
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from models import IntegralClass, LoopLengthResult, StableNormEstimate
from modules.asymptotic_cycles import parallel_map
from modules.errors import DomainError, ResolutionError
from modules.torus_geometry import TorusGeometry, path_length, segment_lengths, torus_diameter

logger = logging.getLogger(__name__)

# Nombre maximal de sommets sautés par la relaxation en corde tendue
RELAX_LOOKAHEAD = 32


def _as_class(klass) -> Tuple[int, ...]:
    if isinstance(klass, IntegralClass):
        return tuple(int(v) for v in klass.coords)
    arr = np.asarray(klass, dtype=float).reshape(-1)
    if not np.array_equal(arr, np.round(arr)):
        raise DomainError(f"Classe non entière: {klass}")
    return tuple(int(v) for v in arr)


class LoopLengthSolver:
    """
    Calcule l(a) avec cache (l(-a) = l(a)).

    Args:
        geom: Géométrie
        resolution: Points de grille par unité (méthode grille)
        force_grid: Utilise la grille même en métrique plate
    """

    def __init__(self, geom: TorusGeometry, resolution: int = 16, force_grid: bool = False):
        if resolution < 2:
            raise ResolutionError(f"Résolution {resolution} trop grossière (minimum 2)")
        self.geom = geom
        self.resolution = int(resolution)
        self.force_grid = force_grid
        self._cache: Dict[Tuple[int, ...], LoopLengthResult] = {}
        self._lock = threading.Lock()

    @property
    def cell_diagonal(self) -> float:
        return float(self.geom.flat_norm(np.ones(self.geom.dim) / self.resolution))

    def lower_bound(self, a: Tuple[int, ...]) -> float:
        """Minorant certifié e^{-sup|u|}·√(aᵀGa)"""
        return math.exp(-self.geom.conformal_bound) * float(self.geom.flat_norm(np.array(a, dtype=float)))

    def length(self, klass) -> LoopLengthResult:
        a = _as_class(klass)
        if len(a) != self.geom.dim:
            raise DomainError(f"Classe de rang {len(a)} sur un tore de dimension {self.geom.dim}")
        key = max(a, tuple(-v for v in a))
        with self._lock:
            cached = self._cache.get(key)
        if cached is None:
            cached = self._compute(key)
            with self._lock:
                self._cache[key] = cached
        if key == a:
            return cached
        polyline = None if cached.polyline is None else cached.polyline[::-1]
        return LoopLengthResult(klass=a, value=cached.value, method=cached.method, upper=cached.upper,
                                lower=cached.lower, resolution=cached.resolution, polyline=polyline)

    def _compute(self, a: Tuple[int, ...]) -> LoopLengthResult:
        if not any(a):
            return LoopLengthResult(klass=a, value=0.0, method='flat-exact', upper=0.0, lower=0.0)
        if self.geom.is_flat and not self.force_grid:
            value = float(self.geom.flat_norm(np.array(a, dtype=float)))
            return LoopLengthResult(klass=a, value=value, method='flat-exact', upper=value, lower=value)
        polyline = self._grid_path(np.array(a))
        relaxed = self._relax(polyline)
        value = path_length(self.geom, relaxed, self._step)
        logger.debug(f"l({a}) ≈ {value:.6f} (grille {self.resolution}, {len(relaxed)} sommets)")
        return LoopLengthResult(klass=a, value=value, method='grid-dijkstra', upper=value,
                                lower=self.lower_bound(a), resolution=self.resolution, polyline=relaxed)

    @property
    def _step(self) -> float:
        return min(1e-2, 0.25 / self.resolution)

    def _grid_path(self, a: np.ndarray) -> np.ndarray:
        """Plus court chemin de x̃ à x̃ + a dans la grille relevée, minimisé sur les points base"""
        n, r = self.geom.dim, self.resolution
        lo = np.minimum(0, a) - 1
        hi = np.maximum(0, a) + 2
        shape = tuple(int(v) for v in (hi - lo) * r + 1)
        size = int(np.prod(shape))
        idx = np.stack(np.unravel_index(np.arange(size), shape), axis=-1)
        coords = lo + idx / r

        rows, cols, weights = [], [], []
        for d in itertools.product((-1, 0, 1), repeat=n):
            # une orientation par arête (graphe non orienté)
            if not any(d) or tuple(d) < tuple(-v for v in d):
                continue
            d = np.array(d)
            target = idx + d
            valid = np.all((target >= 0) & (target < np.array(shape)), axis=1)
            src = np.nonzero(valid)[0]
            dst = np.ravel_multi_index(tuple(target[valid].T), shape)
            mids = coords[valid] + d / (2.0 * r)
            w = self.geom.conformal_factor(mids) * float(self.geom.flat_norm(d / r))
            rows.append(src)
            cols.append(dst)
            weights.append(w)
        graph = csr_matrix((np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(size, size))

        face = int(np.nonzero(a)[0][0])
        others = [j for j in range(n) if j != face]
        base_idx = []
        for offsets in itertools.product(range(r), repeat=n - 1):
            point = np.empty(n, dtype=int)
            point[face] = -lo[face] * r
            for j, k in zip(others, offsets):
                point[j] = -lo[j] * r + k
            base_idx.append(point)
        base_idx = np.array(base_idx)
        sources = np.ravel_multi_index(tuple(base_idx.T), shape)
        targets = np.ravel_multi_index(tuple((base_idx + a * r).T), shape)

        dist, pred = dijkstra(graph, directed=False, indices=sources, return_predecessors=True)
        reach = dist[np.arange(sources.size), targets]
        best = int(np.argmin(reach))
        if not np.isfinite(reach[best]):
            raise ResolutionError(f"Aucun chemin de classe {a.tolist()} à la résolution {r}")
        path = [int(targets[best])]
        while path[-1] != sources[best]:
            path.append(int(pred[best, path[-1]]))
        return coords[path[::-1]]

    def _relax(self, pts: np.ndarray) -> np.ndarray:
        """Une passe gloutonne de corde tendue: raccourci accepté s'il n'allonge pas le chemin"""
        m = len(pts)
        edge_sub = max(1, int(math.ceil(self.cell_diagonal / self._step)))
        along = np.concatenate([[0.0], np.cumsum(segment_lengths(self.geom, pts[:-1], pts[1:], edge_sub))])
        chord_sub = edge_sub * RELAX_LOOKAHEAD
        out = [pts[0]]
        i = 0
        while i < m - 1:
            candidates = np.arange(i + 2, min(m - 1, i + RELAX_LOOKAHEAD) + 1)
            j = i + 1
            if candidates.size:
                direct = segment_lengths(self.geom, np.repeat(pts[i:i + 1], candidates.size, axis=0),
                                         pts[candidates], chord_sub)
                shorter = np.nonzero(direct <= along[candidates] - along[i])[0]
                if shorter.size:
                    j = int(candidates[shorter[-1]])
            out.append(pts[j])
            i = j
        return np.array(out)


def minimal_loop_length(geom: TorusGeometry, klass, resolution: int = 16,
                        force_grid: bool = False) -> LoopLengthResult:
    """
    l(a) = inf des longueurs des lacets de classe a.

    Args:
        geom: Géométrie
        klass: Classe entière a
        resolution: Résolution de la grille (métrique conforme)
        force_grid: Calcul sur grille même en métrique plate

    Returns:
        LoopLengthResult (majorant; exact en métrique plate)
    """
    return LoopLengthSolver(geom, resolution, force_grid).length(klass)


def stable_norm_lower_bound(geom: TorusGeometry, klass) -> float:
    """e^{min u}·√(aᵀGa), avec min u >= -borne certifiée de |u|"""
    a = np.array(_as_class(klass), dtype=float)
    return math.exp(-geom.conformal_bound) * float(geom.flat_norm(a))


def stable_norm(geom: TorusGeometry, klass, n_max: int, resolution: int = 16,
                threads: int = 1, solver: Optional[LoopLengthSolver] = None) -> StableNormEstimate:
    """
    ||a|| estimée par le minimum courant de l(n·a)/n, n <= n_max; les majorants
    sous-additifs (l(n·a) + C0)/n sont rapportés avec la suite.

    Returns:
        StableNormEstimate
    """
    if n_max < 4:
        raise DomainError(f"n_max doit être >= 4, reçu {n_max}")
    a = np.array(_as_class(klass))
    solver = solver or LoopLengthSolver(geom, resolution)
    C0 = torus_diameter(geom)['C0']
    if geom.is_flat and not solver.force_grid:
        base = solver.length(a).value
        lengths = [n * base for n in range(1, n_max + 1)]
        ratios = [base] * n_max
    else:
        results = parallel_map(lambda n: solver.length(n * a), range(1, n_max + 1), threads)
        lengths = [res.value for res in results]
        ratios = [length / n for n, length in enumerate(lengths, start=1)]
    running = list(np.minimum.accumulate(ratios))
    upper = [(length + C0) / n for n, length in enumerate(lengths, start=1)]
    logger.info(f"Norme stable de {a.tolist()}: {running[-1]:.6f} (n <= {n_max})")
    return StableNormEstimate(
        klass=tuple(int(v) for v in a),
        value=float(running[-1]),
        lengths=lengths,
        upper_bounds=upper,
        running_min=[float(v) for v in running],
        n_used=n_max,
        C0=C0,
        lower_bound=stable_norm_lower_bound(geom, a),
    )


def subadditivity_audit(geom: TorusGeometry, pairs: Sequence[Tuple[Any, Any]],
                        resolution: int = 8, multiples: Sequence[Tuple[Any, int]] = (),
                        solver: Optional[LoopLengthSolver] = None) -> Dict[str, Any]:
    """
    Vérifie l(a+b) <= l(a) + l(b) + C0 et l(n·a) <= n·l(a), à la tolérance de grille près
    (2·diagonale de cellule·e^{sup|u|}, par copie pour les multiples).

    Returns:
        Rapport {'success', 'violations', 'checked', 'slack', 'C0'}
    """
    solver = solver or LoopLengthSolver(geom, resolution)
    C0 = torus_diameter(geom)['C0']
    slack = 0.0 if geom.is_flat and not solver.force_grid else \
        2.0 * solver.cell_diagonal * math.exp(geom.conformal_bound)
    violations = []
    for a, b in pairs:
        a, b = np.array(_as_class(a)), np.array(_as_class(b))
        if not any(a + b):
            continue
        lab = solver.length(a + b).value
        bound = solver.length(a).value + solver.length(b).value + C0
        if lab > bound + slack + 1e-12:
            violations.append({'a': a.tolist(), 'b': b.tolist(), 'l_sum': lab, 'bound': bound})
    for a, n in multiples:
        a = np.array(_as_class(a))
        lna = solver.length(n * a).value
        bound = abs(n) * solver.length(a).value
        if lna > bound + abs(n) * slack + 1e-12:
            violations.append({'a': a.tolist(), 'n': n, 'l_multiple': lna, 'bound': bound})
    if violations:
        logger.warning(f"Sous-additivité: {len(violations)} violation(s), première {violations[0]}")
    return {'success': not violations, 'violations': violations,
            'checked': len(pairs) + len(multiples), 'slack': slack, 'C0': C0}


def multiple_lengths(geom: TorusGeometry, klass, n_max: int, resolution: int = 16,
                     solver: Optional[LoopLengthSolver] = None) -> List[Dict[str, Any]]:
    """Table l(n·a) contre n·l(a) (sous-additivité stricte sur une métrique à vallées)"""
    a = np.array(_as_class(klass))
    solver = solver or LoopLengthSolver(geom, resolution)
    single = solver.length(a).value
    rows = []
    for n in range(1, n_max + 1):
        value = solver.length(n * a).value
        rows.append({'n': n, 'l_multiple': value, 'n_times_l': n * single,
                     'strict': value < n * single - 1e-9})
    return rows
