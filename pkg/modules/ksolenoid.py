"""
k-solénoïdes à région de piégeage
Tranches virtuelles, exhaustions contrôlées (constantes c0, c1, c2), classes k-fenêtrées
et réalisation d'un 2-solénoïde immergé dans T³
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from config import get_config
from models import AsymptoticEstimate, ExhaustionWindow, HomologyVector, IntegralClass, NotConvergent
from modules.errors import ConstructionError, DomainError
from modules.solenoid import SuspensionSolenoid, ruelle_sullivan_class, slab_chain_windows
from modules.transversal import CircleRotation, PiecewiseConstantWeight, TransversalSystem

logger = logging.getLogger(__name__)

# Point générique des droites de coordonnées (évite les arêtes des triangles)
GENERIC_POINT = np.array([0.12345678, 0.27182818, 0.57721566])


@dataclass(frozen=True, eq=False)
class TrappingSolenoid:
    """
    Solénoïde découpé en tranches compactes L̄_x par une bande de piégeage.
    slab_volume = Vol_k(L̄_x), slab_class = φ_T(x) dans H_k(M, Z);
    crossing = distance entre C_x et C_{R(x)}, diameter = diamètre de la tranche.
    """
    base: TransversalSystem
    slab_volume: Any
    slab_class: PiecewiseConstantWeight
    crossing: Any = None
    diameter: Any = None
    declared: Optional[Dict[str, float]] = None
    epsilon0: float = 0.25
    cap_volume: float = 0.0
    degree: int = 2
    # tranches dont la classe géométrique a été comparée à la classe déclarée
    checked_slabs: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon0 < 0.5:
            raise DomainError(f"ε0 hors de ]0, 1/2[: {self.epsilon0}")
        if self.cap_volume < 0:
            raise DomainError(f"Volume de calotte négatif: {self.cap_volume}")
        if self.crossing is None:
            object.__setattr__(self, 'crossing', self.slab_volume)
        if self.diameter is None:
            object.__setattr__(self, 'diameter', self.crossing)
        c0, c1, c2 = self.constants()
        if not (c0 > 0 and math.isfinite(c1) and math.isfinite(c2)):
            raise DomainError(f"Constantes de piégeage invalides: c0={c0}, c1={c1}, c2={c2}")
        if not self.slab_class.is_integral:
            raise DomainError("Les classes de tranche doivent être entières")

    def constants(self) -> Tuple[float, float, float]:
        """(c0, c1, c2) déclarées, sinon mesurées"""
        if self.declared:
            return float(self.declared['c0']), float(self.declared['c1']), float(self.declared['c2'])
        return trapping_constants(self)

    def suspension(self) -> SuspensionSolenoid:
        return SuspensionSolenoid(self.base, self.slab_volume, self.slab_class)

    def orbit_values(self, x0, a: int, b: int) -> Dict[str, np.ndarray]:
        """Poids des tranches a..b-1 le long de l'orbite de x0 (indices négatifs par R^{-1})"""
        state = self.base.seed_state(x0)
        coords = self.base.coordinates(self.base.orbit(state, b))
        if a < 0:
            back = self.base.coordinates(self.base.backward_orbit(state, -a))[::-1]
            coords = np.concatenate([back, coords])
        return {
            'coords': coords,
            'classes': self.slab_class(coords),
            'volumes': self.slab_volume(coords)[:, 0],
        }

    def to_dict(self) -> Dict[str, Any]:
        c0, c1, c2 = self.constants()
        return {'base': self.base.to_dict(), 'degree': self.degree, 'epsilon0': self.epsilon0,
                'cap_volume': self.cap_volume, 'constants': {'c0': c0, 'c1': c1, 'c2': c2},
                'slab_class': self.slab_class.to_dict(), 'checked_slabs': self.checked_slabs}


def trapping_constants(sol: TrappingSolenoid) -> Tuple[float, float, float]:
    """c0 = min traversée, c1 = max diamètre, c2 = max volume de tranche"""
    return sol.crossing.bounds()[0], sol.diameter.bounds()[1], sol.slab_volume.bounds()[1]


def constants_consistency(sol: TrappingSolenoid, samples: int = 1000, seed: int = 0) -> Dict[str, Any]:
    """Sur des tranches tirées au hasard: c0 <= traversée <= c1 et volume <= c2"""
    c0, c1, c2 = sol.constants()
    x = np.random.default_rng(seed).uniform(0.0, 1.0, samples)
    crossing = sol.crossing(x)[:, 0]
    volume = sol.slab_volume(x)[:, 0]
    ok = bool(np.all(crossing >= c0 - 1e-12) and np.all(crossing <= c1 + 1e-12)
              and np.all(volume <= c2 + 1e-12))
    return {'success': ok, 'min_crossing': float(crossing.min()), 'max_crossing': float(crossing.max()),
            'max_volume': float(volume.max()), 'c0': c0, 'c1': c1, 'c2': c2}


def slab_sum_class(sol: TrappingSolenoid, x0, a: int, b: int) -> IntegralClass:
    """
    Σ_{i=a}^{b-1} φ_T(R^i x0), somme entière exacte

    Args:
        sol: Solénoïde à piégeage
        x0: Graine
        a: Premier indice (a <= 0)
        b: Fin exclue (b > 0)

    Returns:
        IntegralClass
    """
    window = ExhaustionWindow(a, b)
    classes = sol.orbit_values(x0, window.a, window.b)['classes']
    return IntegralClass(np.round(classes).astype(np.int64).sum(axis=0))


def exhaustion_schedule(N: int, count: int = 3) -> List[ExhaustionWindow]:
    """Fenêtres (-n/2, n - n/2) pour n = N/2^{count-1}, ..., N"""
    if N < 2 ** count:
        raise DomainError(f"N={N} trop petit pour {count} fenêtres")
    sizes = [N >> (count - 1 - j) for j in range(count)]
    return [ExhaustionWindow(-(n // 2), n - n // 2) for n in sizes]


def k_schwartzman_class(sol: TrappingSolenoid, x0, schedule: Sequence[ExhaustionWindow],
                        tol: Optional[float] = None, with_caps: bool = False):
    """
    [N_{a,b}] / Vol_k(N_{a,b}) sur les fenêtres d'exhaustion; Vol = Σ l_T (+ 2·capVol avec calottes).

    Returns:
        AsymptoticEstimate ou NotConvergent
    """
    tol = get_config().CONVERGENCE_TOL if tol is None else tol
    if len(schedule) < 1:
        raise DomainError("Calendrier d'exhaustion vide")
    if any(w2.size <= w1.size for w1, w2 in zip(schedule, schedule[1:])):
        raise DomainError("Les fenêtres d'exhaustion doivent grandir strictement")
    a_min = min(w.a for w in schedule)
    b_max = max(w.b for w in schedule)
    data = sol.orbit_values(x0, a_min, b_max)
    classes = np.round(data['classes'])
    volumes = data['volumes']
    values = []
    for w in schedule:
        lo, hi = w.a - a_min, w.b - a_min
        volume = math.fsum(volumes[lo:hi]) + (2.0 * sol.cap_volume if with_caps else 0.0)
        values.append(classes[lo:hi].sum(axis=0) / volume)
    values = np.vstack(values)
    tail = values[-3:]
    residual = max((float(np.linalg.norm(p - q)) for i, p in enumerate(tail) for q in tail[i + 1:]),
                   default=math.inf)
    windows = tuple((float(w.a), float(w.b)) for w in schedule)
    if residual > tol:
        logger.warning(f"Classe k-fenêtrée non stabilisée (écart {residual:.3g})")
        return NotConvergent(route='slabs', diameter=residual, last_values=tail,
                             message="Sommes de tranches non stabilisées")
    return AsymptoticEstimate(value=HomologyVector(values[-1]), route='slabs', residual=residual,
                              converged=True, windows=windows, window_values=values)


def _chain_arrays(sol: TrappingSolenoid, x0, count: int) -> Dict[str, np.ndarray]:
    base = sol.base
    state = base.seed_state(x0)
    forward = base.coordinates(base.orbit(state, count))
    backward = base.coordinates(base.backward_orbit(state, count))
    return {
        'cost_f': sol.crossing(forward)[:, 0], 'cost_b': sol.crossing(backward)[:, 0],
        'diam_f': sol.diameter(forward)[:, 0], 'diam_b': sol.diameter(backward)[:, 0],
        'vol_f': sol.slab_volume(forward)[:, 0], 'vol_b': sol.slab_volume(backward)[:, 0],
    }


def _volume(chain: Dict[str, np.ndarray], window: Tuple[int, int]) -> float:
    a, b = window
    return math.fsum(chain['vol_f'][:b]) + math.fsum(chain['vol_b'][:-a] if a < 0 else [])


def exhaustion_control_check(sol: TrappingSolenoid, x0, radii: Sequence[float],
                             fraction: Optional[float] = None, seed: int = 0) -> Dict[str, Any]:
    """
    Pour chaque rayon: fenêtre intérieure Û_{a,b} (tranches contenues dans la boule) et
    extérieure Û_{a',b'} (tranches rencontrées). Vérifie b'-b < c1/c0 + 2, a-a' < c1/c0 + 2,
    défaut de volume <= (b'-b + a-a')·c2 < 2(c1/c0 + 2)·c2, et le rapport défaut / volume
    sous l'enveloppe 2(c1/c0 + 2)·c2 / Vol(Û_{a,b}), elle-même décroissante.

    Returns:
        Rapport {'success', 'bound', 'rows', 'violations'}
    """
    radii = [float(r) for r in radii]
    if not radii or any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise DomainError("Les rayons doivent croître strictement")
    c0, c1, c2 = sol.constants()
    bound = c1 / c0 + 2.0
    u = np.random.default_rng(seed).uniform(0.0, 1.0) if fraction is None else float(fraction)
    chain = _chain_arrays(sol, x0, int(math.ceil(radii[-1] / c0)) + 3)

    rows, violations = [], []
    last_envelope = math.inf
    for r in radii:
        windows = slab_chain_windows(chain['cost_f'], chain['cost_b'], r, u,
                                     chain['diam_f'], chain['diam_b'])
        inner, outer = windows['inner'], windows['outer']
        if inner is None:
            rows.append({'radius': r, 'inner': None, 'outer': list(outer)})
            continue
        (a, b), (a2, b2) = inner, outer
        inner_volume = _volume(chain, inner)
        defect = _volume(chain, outer) - inner_volume
        envelope = 2.0 * bound * c2 / inner_volume
        row = {
            'radius': r, 'inner': [a, b], 'outer': [a2, b2],
            'forward_excess': b2 - b, 'backward_excess': a - a2,
            'inner_volume': inner_volume, 'defect': defect,
            'ratio': defect / inner_volume, 'envelope': envelope,
        }
        checks = {
            'forward_excess': b2 - b < bound,
            'backward_excess': a - a2 < bound,
            'defect_counted': defect <= (b2 - b + a - a2) * c2 + 1e-9,
            'defect_bounded': defect < 2.0 * bound * c2,
            'ratio_enveloped': row['ratio'] <= envelope + 1e-12,
            'envelope_monotone': envelope <= last_envelope + 1e-12,
        }
        for name, ok in checks.items():
            if not ok:
                violations.append({'radius': r, 'check': name})
        last_envelope = envelope
        rows.append(row)
    if violations:
        logger.warning(f"Contrôle d'exhaustion: {len(violations)} violation(s), première: {violations[0]}")
    return {'success': not violations, 'bound': bound, 'fraction': u,
            'constants': {'c0': c0, 'c1': c1, 'c2': c2}, 'rows': rows, 'violations': violations}


def random_window_audit(sol: TrappingSolenoid, count: int = 100, max_radius: float = 50.0,
                        seed: int = 0) -> Dict[str, Any]:
    """Excès b'-b et a-a' sur des boules de feuille tirées au hasard (graine, rayon, position)"""
    rng = np.random.default_rng(seed)
    c0, c1, _ = sol.constants()
    bound = c1 / c0 + 2.0
    worst_f = worst_b = 0
    failures = 0
    for _ in range(count):
        x0 = float(rng.uniform(0.0, 1.0))
        radius = float(rng.uniform(2.0 * c1, max_radius))
        report = exhaustion_control_check(sol, x0, [radius], fraction=float(rng.uniform(0.0, 1.0)))
        row = report['rows'][0]
        worst_f = max(worst_f, row.get('forward_excess', 0))
        worst_b = max(worst_b, row.get('backward_excess', 0))
        failures += 0 if report['success'] else 1
    return {'success': failures == 0, 'windows': count, 'bound': bound,
            'max_forward_excess': worst_f, 'max_backward_excess': worst_b, 'failures': failures}


def slab_adjacency_is_path(sol: TrappingSolenoid, x0, a: int, b: int) -> bool:
    """
    Graphe des tranches a..b-1 reliées quand elles partagent une composante de bord
    (C_{R^i x0} est commune aux tranches i-1 et i): vrai si c'est un chemin.
    """
    window = ExhaustionWindow(a, b)
    coords = sol.orbit_values(x0, window.a, window.b + 1)['coords']
    size = window.size
    owners: Dict[bytes, List[int]] = {}
    for i in range(size):
        for key in (coords[i].tobytes(), coords[i + 1].tobytes()):
            owners.setdefault(key, []).append(i)
    rows, cols = [], []
    for slabs in owners.values():
        for i, j in itertools.combinations(sorted(set(slabs)), 2):
            rows.append(i)
            cols.append(j)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size)).tocsr()
    graph = ((graph + graph.T) > 0).astype(float)
    components, _ = connected_components(graph, directed=False)
    degrees = np.asarray(graph.sum(axis=1)).ravel()
    edges = int(graph.nnz // 2)
    return components == 1 and edges == size - 1 and bool(np.all(degrees <= 2))


def _triangle_line_crossings(tri: np.ndarray, axis: int) -> int:
    """Intersections signées d'un triangle avec les droites p + s·e_axis + Z³"""
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    if abs(normal[axis]) < 1e-15:
        return 0
    j, l = [c for c in range(3) if c != axis]
    P = tri[:, [j, l]]
    origin = GENERIC_POINT[[j, l]]
    lo = np.floor(P.min(axis=0) - origin).astype(int)
    hi = np.ceil(P.max(axis=0) - origin).astype(int)
    gx, gy = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing='ij')
    Q = np.column_stack([gx.ravel(), gy.ravel()]) + origin
    v0, v1 = P[1] - P[0], P[2] - P[0]
    det = v0[0] * v1[1] - v0[1] * v1[0]
    w = Q - P[0]
    beta = (w[:, 0] * v1[1] - w[:, 1] * v1[0]) / det
    gamma = (v0[0] * w[:, 1] - v0[1] * w[:, 0]) / det
    inside = (beta >= 0) & (gamma >= 0) & (beta + gamma <= 1)
    return int(np.sign(normal[axis])) * int(np.sum(inside))


def _parallelogram(corner: np.ndarray, du: np.ndarray, dv: np.ndarray) -> List[np.ndarray]:
    p00, p10, p11, p01 = corner, corner + du, corner + du + dv, corner + dv
    return [np.array([p00, p10, p11]), np.array([p00, p11, p01])]


def t3_slab_class(alpha: float, x: float, wrap: bool) -> np.ndarray:
    """
    Classe dans H_2(T³) de la tranche fermée sur x: tranche (θ, t) -> (x + t(α + k), t, θ)
    (k = -1 si enroulée) et bande de fermeture (s, θ) -> (x + α(1 - s), 0, θ).
    Coordonnée i = intersection signée avec les cercles de direction e_i.
    """
    k = -1.0 if wrap else 0.0
    slab = _parallelogram(np.array([x, 0.0, 0.0]), np.array([alpha + k, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    strip = _parallelogram(np.array([x + alpha, 0.0, 0.0]), np.array([-alpha, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    return np.array([sum(_triangle_line_crossings(tri, axis) for tri in slab + strip) for axis in range(3)])


def t3_trapping_solenoid(alpha: float, wrap_cell: Optional[Tuple[float, float]] = None,
                         area_roof: bool = True, declared_phi: Optional[PiecewiseConstantWeight] = None,
                         samples: int = 1000, seed: int = 0,
                         constants: Optional[Dict[str, float]] = None) -> TrappingSolenoid:
    """
    2-solénoïde immergé dans T³ au-dessus d'une rotation, dont les classes de tranche
    sont calculées géométriquement puis comparées aux classes déclarées.

    Args:
        alpha: Nombre de rotation
        wrap_cell: Cellule [lo, hi) des tranches enroulées (aucune si None)
        area_roof: Volume de tranche = aire plate (sinon 1)
        declared_phi: Classes déclarées (déduites de wrap_cell si None)
        samples: Nombre de tranches vérifiées
        seed: Graine du tirage des tranches
        constants: Constantes c0, c1, c2 déclarées (mesurées si None)

    Returns:
        TrappingSolenoid
    """
    base = CircleRotation(alpha)
    a = base.alpha
    cells = () if wrap_cell is None else (tuple(float(v) for v in wrap_cell),)
    wrapped = PiecewiseConstantWeight(cells, np.ones((len(cells), 1)), np.zeros(1))
    phi = declared_phi or PiecewiseConstantWeight(cells, np.array([[1.0, 1.0, 0.0]] * len(cells)).reshape(-1, 3),
                                                  np.array([1.0, 0.0, 0.0]))

    x = np.random.default_rng(seed).uniform(0.0, 1.0, samples)
    flags = wrapped(x)[:, 0] > 0
    declared = phi(x)
    checked = 0
    for xi, flag, value in zip(x, flags, declared):
        geometric = t3_slab_class(a, float(xi), bool(flag))
        if not np.array_equal(geometric, value):
            raise ConstructionError(f"Tranche x={xi:.6f}: classe géométrique {geometric.tolist()}, "
                                    f"déclarée {value.tolist()}")
        checked += 1
    logger.info(f"Solénoïde T³ (α={a:.6f}): {checked} tranche(s) vérifiée(s) par intersections")

    plain, wrapped_len = math.hypot(1.0, a), math.hypot(1.0, a - 1.0)
    crossing = PiecewiseConstantWeight(cells, np.full((len(cells), 1), wrapped_len), np.array([plain]))
    diameter = PiecewiseConstantWeight(cells, np.full((len(cells), 1), math.hypot(wrapped_len, 0.5)),
                                       np.array([math.hypot(plain, 0.5)]))
    volume = crossing if area_roof else PiecewiseConstantWeight.constant([1.0])
    return TrappingSolenoid(base=base, slab_volume=volume, slab_class=phi, crossing=crossing,
                            diameter=diameter, declared=constants, epsilon0=0.25, cap_volume=a,
                            checked_slabs=checked)


def t3_ruelle_sullivan_class(sol: TrappingSolenoid) -> HomologyVector:
    """(∫ φ_T dμ) / (∫ Vol(L̄_x) dμ)"""
    return ruelle_sullivan_class(sol.suspension())
