"""
Cycles asymptotiques de Schwartzman
Classes fenêtrées, cinq voies de calcul, détection de convergence et balayage des amas
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import get_config
from models import (AsymptoticEstimate, ClusterEstimate, ConeReport, HomologyVector,
                    IntegralClass, NotConvergent, PointSet, WindowGrid, WindowSchedule)
from modules.calibration import CalibratingFunction, identity_calibrator
from modules.errors import DomainError, StructuralError, TransversalityError
from modules.homology import cone_from_samples, segment_distance
from modules.torus_geometry import TorusGeometry, TrigPolynomial, closing_displacements
from modules.trajectories import LiftedCurve, SpeedFunction, reparametrize

logger = logging.getLogger(__name__)

ROUTES = ('loop', 'calib', 'form', 'circle', 'cross')

# Au-delà, une fenêtre échantillonnée coûterait plusieurs centaines de Mo
MAX_WINDOW_SAMPLES = 4_000_000
BISECTION_STEPS = 60
DEFAULT_ANGULAR_TOL = 0.05


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> List[Any]:
    """map ordonné, éventuellement sur un pool de threads (résultats dans l'ordre des entrées)"""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True, eq=False)
class OneForm:
    """α = a·dx + dφ, fermée par construction, de classe de cohomologie a"""
    cohomology: np.ndarray
    potential: Optional[TrigPolynomial] = None

    def __post_init__(self):
        a = np.array(self.cohomology, dtype=float).reshape(-1)
        if self.potential is not None and self.potential.dim != a.size:
            raise StructuralError("Potentiel de dimension incompatible")
        a.setflags(write=False)
        object.__setattr__(self, 'cohomology', a)

    @classmethod
    def from_descriptor(cls, dim: int, descriptor: Dict[str, Any]) -> 'OneForm':
        terms = descriptor.get('potential') or []
        return cls(np.array(descriptor['a'], dtype=float),
                   TrigPolynomial.from_terms(dim, terms) if terms else None)

    @property
    def dim(self) -> int:
        return int(self.cohomology.size)

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """Coefficients de α en x, forme (..., n)"""
        x = np.asarray(x, dtype=float)
        coeff = np.broadcast_to(self.cohomology, x.shape)
        if self.potential is None:
            return coeff
        return coeff + self.potential.gradient(x)


@dataclass(frozen=True, eq=False)
class Hypersurface:
    """H = {x : <k, x> ≡ c mod 1}, normale entière primitive, orientée par sign·k"""
    normal: np.ndarray
    offset: float = 0.5
    orientation: int = 1

    def __post_init__(self):
        k = np.array(self.normal, dtype=float).reshape(-1)
        if not np.array_equal(k, np.round(k)) or not np.any(k):
            raise DomainError(f"Normale non entière ou nulle: {self.normal}")
        if math.gcd(*[int(abs(v)) for v in k]) != 1:
            raise DomainError(f"Normale non primitive: {k.astype(int).tolist()}")
        if not 0.0 <= self.offset < 1.0:
            raise DomainError(f"Décalage hors de [0, 1): {self.offset}")
        if self.orientation not in (1, -1):
            raise DomainError(f"Orientation invalide: {self.orientation}")
        k.setflags(write=False)
        object.__setattr__(self, 'normal', k)

    @classmethod
    def from_descriptor(cls, descriptor: Dict[str, Any]) -> 'Hypersurface':
        return cls(np.array(descriptor['k'], dtype=float), float(descriptor.get('c', 0.5)),
                   int(descriptor.get('orientation', 1)))


@dataclass(frozen=True, eq=False)
class CircleMap:
    """f(x) = <k, x> + c mod 1, application affine T^n -> T^1"""
    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        k = np.array(self.normal, dtype=float).reshape(-1)
        if not np.array_equal(k, np.round(k)) or not np.any(k):
            raise DomainError(f"Application de cercle non entière ou nulle: {self.normal}")
        k.setflags(write=False)
        object.__setattr__(self, 'normal', k)

    @classmethod
    def from_descriptor(cls, descriptor: Dict[str, Any]) -> 'CircleMap':
        return cls(np.array(descriptor['k'], dtype=float), float(descriptor.get('c', 0.0)))


def default_payload(route: str, dim: int) -> Dict[str, Any]:
    """Charge utile canonique: base duale e_i pour chaque voie"""
    eye = np.eye(dim)
    if route == 'loop':
        return {'scheme': 'shortest'}
    if route == 'calib':
        return {'calibrator': identity_calibrator(dim)}
    if route == 'form':
        return {'forms': [OneForm(e) for e in eye]}
    if route == 'circle':
        return {'maps': [CircleMap(e) for e in eye]}
    if route == 'cross':
        return {'hypersurfaces': [Hypersurface(e) for e in eye]}
    raise DomainError(f"Voie inconnue: {route}")


def _window_displacement(curve: LiftedCurve, geom: TorusGeometry, starts, ends,
                         scheme: str = 'shortest') -> np.ndarray:
    """c̃(t) - c̃(s) + déplacement de fermeture, vectorisé (non arrondi)"""
    P = curve(np.asarray(starts, dtype=float))
    Q = curve(np.asarray(ends, dtype=float))
    return Q - P + closing_displacements(geom, Q, P, scheme)


def window_classes(curve: LiftedCurve, geom: TorusGeometry, starts, ends,
                   scheme: str = 'shortest') -> np.ndarray:
    """Classes entières de plusieurs fenêtres, forme (m, n)"""
    starts = np.atleast_1d(np.asarray(starts, dtype=float))
    ends = np.atleast_1d(np.asarray(ends, dtype=float))
    if np.any(starts >= ends):
        raise DomainError("Chaque fenêtre doit vérifier s < t")
    return np.round(_window_displacement(curve, geom, starts, ends, scheme))


def window_class(curve: LiftedCurve, geom: TorusGeometry, s: float, t: float,
                 scheme: str = 'shortest') -> IntegralClass:
    """
    Classe du lacet c|[s,t] suivi du segment de fermeture γ_{s,t}.

    Args:
        curve: Courbe relevée
        geom: Géométrie
        s: Début (s < t)
        t: Fin
        scheme: Famille de segments de fermeture ('shortest' ou 'chart')

    Returns:
        IntegralClass
    """
    if not s < t:
        raise DomainError(f"Fenêtre invalide: s={s} >= t={t}")
    return IntegralClass(window_classes(curve, geom, [s], [t], scheme)[0])


def _speed_bound(curve: LiftedCurve, s: float, t: float) -> float:
    if curve.speed_bound is not None and curve.speed_bound > 0:
        return float(curve.speed_bound)
    probe = np.linspace(s, t, 1025)
    return max(1e-12, 1.25 * float(np.max(np.linalg.norm(curve.velocity_at(probe), axis=1))))


def _sample_window(curve: LiftedCurve, s: float, t: float) -> Tuple[np.ndarray, np.ndarray]:
    cfg = get_config()
    count = int(math.ceil(cfg.SAMPLES_PER_UNIT * _speed_bound(curve, s, t) * (t - s))) + 1
    count = max(count, 2)
    if count > MAX_WINDOW_SAMPLES:
        raise DomainError(f"Fenêtre ({s}, {t}) trop longue pour l'échantillonnage ({count} points)")
    times = np.linspace(s, t, count)
    return times, curve(times)


def form_integral(curve: LiftedCurve, form: OneForm, s: float, t: float) -> float:
    """∫_{c([s,t])} α par la règle du point milieu composite sur la courbe échantillonnée"""
    _, pts = _sample_window(curve, s, t)
    seg = np.diff(pts, axis=0)
    mids = 0.5 * (pts[:-1] + pts[1:])
    return math.fsum(np.einsum('ij,ij->i', form.coefficients(mids), seg))


def circle_lift_displacement(curve: LiftedCurve, fmap: CircleMap, s: float, t: float) -> float:
    """Déplacement du relevé de f∘c sur [s, t], par déroulement de la phase échantillonnée"""
    _, pts = _sample_window(curve, s, t)
    phase = np.mod(pts @ fmap.normal + fmap.offset, 1.0)
    unwrapped = np.unwrap(phase, period=1.0)
    return float(unwrapped[-1] - unwrapped[0])


def signed_crossings(curve: LiftedCurve, surface: Hypersurface, s: float, t: float,
                     transversality_tol: Optional[float] = None) -> int:
    """
    Nombre algébrique de traversées de H sur [s, t]; chaque traversée est localisée
    par dichotomie et sa vitesse normale comparée au seuil de transversalité.
    """
    tol = get_config().TRANSVERSALITY_TOL if transversality_tol is None else transversality_tol
    times, pts = _sample_window(curve, s, t)
    k = surface.normal
    level = pts @ k - surface.offset
    floors = np.floor(level)
    jumps = np.nonzero(np.diff(floors))[0]
    if jumps.size:
        lo = times[jumps].copy()
        hi = times[jumps + 1].copy()
        rising = floors[jumps + 1] > floors[jumps]
        target = np.where(rising, floors[jumps + 1], floors[jumps])
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            above = curve(mid) @ k - surface.offset >= target
            move_hi = above == rising
            hi = np.where(move_hi, mid, hi)
            lo = np.where(move_hi, lo, mid)
        tau = 0.5 * (lo + hi)
        normal_speed = curve.velocity_at(tau) @ (k / np.linalg.norm(k))
        worst = int(np.argmin(np.abs(normal_speed)))
        if abs(normal_speed[worst]) < tol:
            raise TransversalityError(
                f"Traversée quasi tangente à t={tau[worst]:.6g} (vitesse normale {normal_speed[worst]:.3g})",
                window=[s, t], crossing_time=float(tau[worst]),
                normal_speed=float(normal_speed[worst]))
    return surface.orientation * int(floors[-1] - floors[0])


def _solve(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    if matrix.shape[0] != matrix.shape[1]:
        raise StructuralError(f"{what}: {matrix.shape[0]} éléments pour le rang {matrix.shape[1]}")
    if abs(np.linalg.det(matrix)) < 1e-12:
        raise StructuralError(f"{what}: famille non indépendante")
    return np.linalg.solve(matrix, rhs)


def _window_value(curve: LiftedCurve, geom: TorusGeometry, route: str,
                  payload: Dict[str, Any], s: float, t: float) -> np.ndarray:
    """Classe normalisée d'une fenêtre selon la voie"""
    span = t - s
    if route == 'loop':
        return window_classes(curve, geom, [s], [t], payload.get('scheme', 'shortest'))[0] / span
    if route == 'calib':
        phi: CalibratingFunction = payload['calibrator']
        values = phi(curve(np.array([s, t])))
        return (values[1] - values[0]) / span
    if route == 'form':
        forms: Sequence[OneForm] = payload['forms']
        A = np.vstack([f.cohomology for f in forms])
        rhs = np.array([form_integral(curve, f, s, t) for f in forms]) / span
        return _solve(A, rhs, "Formes")
    if route == 'circle':
        maps: Sequence[CircleMap] = payload['maps']
        K = np.vstack([m.normal for m in maps])
        rhs = np.array([circle_lift_displacement(curve, m, s, t) for m in maps]) / span
        return _solve(K, rhs, "Applications de cercle")
    if route == 'cross':
        surfaces: Sequence[Hypersurface] = payload['hypersurfaces']
        K = np.vstack([h.orientation * h.normal for h in surfaces])
        tol = payload.get('transversality_tol')
        rhs = np.array([signed_crossings(curve, h, s, t, tol) for h in surfaces], dtype=float) / span
        return _solve(K, rhs, "Hypersurfaces")
    raise DomainError(f"Voie inconnue: {route}")


def _max_pairwise(values: np.ndarray) -> float:
    if values.shape[0] < 2:
        return 0.0
    return max(float(np.linalg.norm(a - b)) for a, b in itertools.combinations(values, 2))


def _stabilization(values: np.ndarray) -> float:
    """Écart maximal entre les trois dernières fenêtres (inf s'il en manque)"""
    if values.shape[0] < 3:
        return math.inf
    return _max_pairwise(values[-3:])


def route_estimate(curve: LiftedCurve, geom: TorusGeometry, route: str,
                   schedule: WindowSchedule, payload: Optional[Dict[str, Any]] = None,
                   tol: Optional[float] = None, threads: int = 1) -> AsymptoticEstimate:
    """
    Estimation de [c] par une voie sur un calendrier de fenêtres.

    Args:
        curve: Courbe relevée
        geom: Géométrie
        route: 'loop', 'calib', 'form', 'circle' ou 'cross'
        schedule: Fenêtres (s_j, t_j)
        payload: Données propres à la voie (voir default_payload)
        tol: Tolérance de stabilisation
        threads: Nombre de threads pour les fenêtres

    Returns:
        AsymptoticEstimate (converged si les trois dernières fenêtres s'accordent à tol près)
    """
    if route not in ROUTES:
        raise DomainError(f"Voie inconnue: {route}")
    if curve.dim != geom.dim:
        raise StructuralError(f"Courbe de dimension {curve.dim}, tore de dimension {geom.dim}")
    tol = get_config().CONVERGENCE_TOL if tol is None else tol
    payload = payload if payload is not None else default_payload(route, geom.dim)

    def evaluate(window):
        s, t = window
        try:
            return _window_value(curve, geom, route, payload, s, t)
        except TransversalityError as e:
            return e

    outcomes = parallel_map(evaluate, schedule.windows, threads)
    accepted, values, rejected = [], [], []
    for window, outcome in zip(schedule.windows, outcomes):
        if isinstance(outcome, TransversalityError):
            logger.warning(f"Fenêtre {window} rejetée (voie {route}): {outcome.message}")
            rejected.append(outcome.to_dict())
            continue
        logger.debug(f"Voie {route}, fenêtre {window}: {outcome}")
        accepted.append(window)
        values.append(outcome)
    if not values:
        raise TransversalityError(f"Toutes les fenêtres rejetées pour la voie {route}")
    values = np.vstack(values)
    residual = _stabilization(values)
    converged = residual <= tol
    logger.info(f"Voie {route}: {len(accepted)} fenêtre(s), résidu {residual:.3g}, "
                f"{'convergé' if converged else 'non convergé'}")
    return AsymptoticEstimate(
        value=HomologyVector(values[-1]),
        route=route,
        residual=residual,
        converged=converged,
        windows=tuple(accepted),
        window_values=values,
        rejected=rejected,
    )


def one_sided_estimates(curve: LiftedCurve, geom: TorusGeometry, schedule: WindowSchedule,
                        route: str = 'loop', payload: Optional[Dict[str, Any]] = None,
                        tol: Optional[float] = None,
                        threads: int = 1) -> Tuple[AsymptoticEstimate, AsymptoticEstimate]:
    """[c+] sur les fenêtres (0, t_j) et [c-] sur les fenêtres (s_j, 0)"""
    positive = route_estimate(curve, geom, route, schedule.positive_side(), payload, tol, threads)
    negative = route_estimate(curve, geom, route, schedule.negative_side(), payload, tol, threads)
    return positive, negative


def schwartzman_class(curve: LiftedCurve, geom: TorusGeometry, tol: float,
                      schedule: WindowSchedule, route: str = 'loop',
                      payload: Optional[Dict[str, Any]] = None, threads: int = 1,
                      angular_tol: float = DEFAULT_ANGULAR_TOL):
    """
    Classe de Schwartzman: limites positive, négative et jointe.

    Returns:
        AsymptoticEstimate si les trois limites se stabilisent et [c+] ≈ [c-],
        NotConvergent sinon (diamètre des dernières fenêtres et cône des échantillons)
    """
    positive, negative = one_sided_estimates(curve, geom, schedule, route, payload, tol, threads)
    joint = route_estimate(curve, geom, route, schedule, payload, tol, threads)
    gap = positive.value.distance(negative.value)
    if positive.converged and negative.converged and joint.converged and gap <= tol:
        return AsymptoticEstimate(
            value=joint.value,
            route=route,
            residual=max(joint.residual, positive.residual, negative.residual, gap),
            converged=True,
            windows=joint.windows,
            window_values=joint.window_values,
            rejected=positive.rejected + negative.rejected + joint.rejected,
            positive=positive.value,
            negative=negative.value,
        )

    tails = np.vstack([positive.window_values[-3:], negative.window_values[-3:],
                       joint.window_values[-3:]])
    samples = PointSet(np.vstack([positive.window_values, negative.window_values,
                                  joint.window_values]))
    cone = cone_from_samples(samples, angular_tol, zero_tol=_zero_tol(schedule, geom.dim))
    diameter = _max_pairwise(tails)
    message = (f"Pas de classe de Schwartzman: écart [c+]-[c-] = {gap:.3g}, "
               f"diamètre des dernières fenêtres {diameter:.3g}, {cone.ray_count} rayon(s)")
    logger.warning(message)
    return NotConvergent(
        route=route,
        diameter=diameter,
        last_values=joint.window_values[-3:],
        message=message,
        positive=positive.value,
        negative=negative.value,
        joint=joint.value,
        cone=cone,
    )


def _zero_tol(schedule: WindowSchedule, dim: int) -> float:
    """Sous ce seuil un échantillon normalisé est compatible avec l'arrondi d'une fermeture"""
    shortest = float(np.min(np.abs(np.concatenate([schedule.starts[schedule.starts != 0],
                                                   schedule.ends[schedule.ends != 0]]))))
    return math.sqrt(dim) / shortest


def cluster_scan(curve: LiftedCurve, geom: TorusGeometry, grid: WindowGrid,
                 tol: Optional[float] = None, balance_span: Optional[float] = None,
                 scheme: str = 'shortest') -> ClusterEstimate:
    """
    Échantillonne [c_{s,t}]/(t-s) sur la grille produit et les amas unilatéraux.
    Un échantillon unilatéral est stable si sa valeur a bougé de moins de
    tol + (1+λ)√n/t sur la dernière "décennie" (rapport λ); un échantillon
    (s, t) est équilibré si ses deux côtés sont stables.

    Args:
        curve: Courbe relevée
        geom: Géométrie
        grid: Grille de fenêtres (au moins 3 décennies de chaque côté)
        tol: Tolérance de stabilité
        balance_span: Rapport λ de la décennie
        scheme: Segments de fermeture

    Returns:
        ClusterEstimate
    """
    cfg = get_config()
    tol = cfg.CONVERGENCE_TOL if tol is None else tol
    span = cfg.BALANCE_SPAN if balance_span is None else balance_span
    neg_decades, pos_decades = grid.decades()
    if neg_decades < 3.0 - 1e-9 or pos_decades < 3.0 - 1e-9:
        raise DomainError(f"La grille doit couvrir 3 décennies de chaque côté "
                          f"(|s|: {neg_decades:.2f}, t: {pos_decades:.2f})")
    n = geom.dim
    starts = np.array(grid.starts)
    ends = np.array(grid.ends)

    S, T = np.meshgrid(starts, ends, indexing='ij')
    S, T = S.ravel(), T.ravel()
    full_values = window_classes(curve, geom, S, T, scheme) / (T - S)[:, None]
    full = PointSet(full_values, np.column_stack([S, T]))

    zeros_t = np.zeros_like(ends)
    zeros_s = np.zeros_like(starts)
    pos_values = window_classes(curve, geom, zeros_t, ends, scheme) / ends[:, None]
    pos_prev = window_classes(curve, geom, zeros_t, ends / span, scheme) / (ends / span)[:, None]
    neg_values = window_classes(curve, geom, starts, zeros_s, scheme) / (-starts)[:, None]
    neg_prev = window_classes(curve, geom, starts / span, zeros_s, scheme) / (-starts / span)[:, None]

    slack = math.sqrt(n) * (1.0 + span)
    pos_stable = np.linalg.norm(pos_values - pos_prev, axis=1) <= tol + slack / ends
    neg_stable = np.linalg.norm(neg_values - neg_prev, axis=1) <= tol + slack / np.abs(starts)
    positive = PointSet(pos_values, np.column_stack([zeros_t, ends]))
    negative = PointSet(neg_values, np.column_stack([starts, zeros_s]))

    balanced_mask = (neg_stable[:, None] & pos_stable[None, :]).ravel()
    balanced = full.subset(balanced_mask)
    logger.info(f"Balayage des amas: {len(full)} fenêtres, {int(pos_stable.sum())}/{ends.size} "
                f"fins stables, {int(neg_stable.sum())}/{starts.size} débuts stables, "
                f"{len(balanced)} échantillon(s) équilibré(s)")
    return ClusterEstimate(
        full=full,
        positive=positive,
        negative=negative,
        balanced=balanced,
        positive_stable=pos_stable,
        negative_stable=neg_stable,
        balance_span=span,
    )


def balanced_cluster_check(est: ClusterEstimate, tol: float) -> Dict[str, Any]:
    """
    Vérifie Cb ⊂ enveloppe additive de (C+, C-) et, pour chaque couple (a, b)
    de représentants stables, qu'un échantillon équilibré approche [a, b].

    Returns:
        Rapport {'success', 'hull_ok', 'pairs_ok', 'worst_point', 'worst_distance', ...}
    """
    if est.positive.is_empty() or est.negative.is_empty():
        raise DomainError("Amas unilatéraux vides")
    A = est.stable_negative() if np.any(est.negative_stable) else est.negative
    B = est.stable_positive() if np.any(est.positive_stable) else est.positive

    worst_distance, worst_point, worst_tau = 0.0, None, None
    for p in est.balanced.vectors():
        dist, _, _, tau = segment_distance(p, A, B)
        if dist > worst_distance or worst_point is None:
            worst_distance, worst_point, worst_tau = dist, p.coords.tolist(), tau
    hull_ok = worst_distance <= tol

    pair_failures = []
    pairs_checked = 0
    if np.any(est.positive_stable) and np.any(est.negative_stable) and not est.balanced.is_empty():
        for a in est.stable_negative().points:
            for b in est.stable_positive().points:
                pairs_checked += 1
                segment = PointSet(a[None, :]), PointSet(b[None, :])
                gaps = [segment_distance(p, *segment)[0] for p in est.balanced.vectors()]
                if min(gaps) > tol:
                    pair_failures.append({'a': a.tolist(), 'b': b.tolist(), 'distance': min(gaps)})
    pairs_ok = not pair_failures
    report = {
        'success': hull_ok and pairs_ok,
        'hull_ok': hull_ok,
        'pairs_ok': pairs_ok,
        'vacuous': pairs_checked == 0,
        'balanced_count': len(est.balanced),
        'pairs_checked': pairs_checked,
        'pair_failures': pair_failures[:10],
        'worst_point': worst_point,
        'worst_distance': worst_distance,
        'worst_tau': worst_tau,
    }
    if not report['success']:
        logger.warning(f"Amas équilibré hors de l'enveloppe additive: point {worst_point}, "
                       f"distance {worst_distance:.3g}, {len(pair_failures)} couple(s) non atteints")
    return report


def unparametrized_cluster(curve: LiftedCurve, geom: TorusGeometry,
                           speeds: Sequence[SpeedFunction], grid: WindowGrid,
                           tol: Optional[float] = None,
                           angular_tol: float = DEFAULT_ANGULAR_TOL) -> Tuple[PointSet, ConeReport]:
    """
    Réunion des amas sur une famille de reparamétrages, puis cône projectif.

    Returns:
        (PointSet des échantillons, ConeReport)
    """
    if not speeds:
        raise DomainError("Famille de vitesses vide")
    clouds = []
    for speed in speeds:
        est = cluster_scan(reparametrize(curve, speed), geom, grid, tol)
        clouds.append(est.full)
    union = clouds[0]
    for cloud in clouds[1:]:
        union = union.union(cloud)
    zero_tol = math.sqrt(geom.dim) / min(min(abs(s) for s in grid.starts), min(grid.ends))
    cone = cone_from_samples(union, angular_tol, zero_tol=zero_tol)
    logger.info(f"Amas non paramétré: {len(union)} échantillons, {cone.ray_count} rayon(s)"
                f"{', cône dégénéré' if cone.ray_count == 0 else ''}")
    return union, cone


def closing_independence(curve: LiftedCurve, geom: TorusGeometry,
                         schedule: WindowSchedule) -> Dict[str, Any]:
    """
    Compare les classes fenêtrées sous deux familles de fermeture ('shortest', 'chart').
    La différence non normalisée reste bornée; la limite normalisée ne change pas.
    """
    starts, ends = schedule.starts, schedule.ends
    shortest = window_classes(curve, geom, starts, ends, 'shortest')
    chart = window_classes(curve, geom, starts, ends, 'chart')
    raw = np.linalg.norm(shortest - chart, axis=1)
    spans = ends - starts
    constant = float(np.max(raw))
    bound = 2.0 * math.sqrt(geom.dim) + 1.0
    return {
        'C': constant,
        'bounded': constant <= bound,
        'bound': bound,
        'normalized_differences': (raw / spans).tolist(),
        'spans': spans.tolist(),
    }


def route_agreement(estimates: Dict[str, AsymptoticEstimate]) -> float:
    """Distance maximale entre estimations de voies différentes"""
    values = np.vstack([e.value.coords for e in estimates.values()])
    return _max_pairwise(values)
