"""
1-solénoïdes mesurés, vus comme suspensions au-dessus d'une transversale
Classes de Ruelle-Sullivan, classes des feuilles, mesures empiriques et croissance contrôlée
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import get_config
from models import AsymptoticEstimate, HomologyVector, MeasuredClassReport, NotConvergent, PointSet, WindowSchedule
from modules.asymptotic_cycles import parallel_map, route_estimate
from modules.errors import DomainError
from modules.homology import hull_membership
from modules.torus_geometry import TorusGeometry
from modules.trajectories import LiftedCurve, linear_flow_curve
from modules.transversal import (AtomicMeasure, CircleRotation, FiniteSystem, PiecewiseConstantWeight,
                                 TransversalSystem)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SuspensionSolenoid:
    """
    Suspension de la base (X, R, μ) par le toit l_T, avec poids d'homologie φ_T
    constant par cellules et réalisation géométrique optionnelle
    """
    base: TransversalSystem
    roof: Any
    phi: PiecewiseConstantWeight
    realization: Optional[Dict[str, Any]] = None

    def __post_init__(self):
        low, high = self.roof.bounds()
        if not (low > 0 and math.isfinite(high)):
            raise DomainError(f"Toit hors de ]0, ∞[: inf={low}, sup={high}")
        if not self.phi.is_integral:
            raise DomainError("Les classes φ_T doivent être entières")

    @property
    def rank(self) -> int:
        return self.phi.rank

    def orbit_weights(self, x0, N: int) -> Tuple[np.ndarray, np.ndarray]:
        """Valeurs (φ_T, l_T) le long de x0, R(x0), ..., R^{N-1}(x0)"""
        coords = self.base.coordinates(self.base.orbit(self.base.seed_state(x0), N))
        return self.phi(coords), self.roof(coords)[:, 0]

    def to_dict(self) -> Dict[str, Any]:
        data = {'base': self.base.to_dict(), 'roof': self.roof.to_dict(), 'phi': self.phi.to_dict()}
        if self.realization:
            data['realization'] = dict(self.realization)
        return data


def ruelle_sullivan_map(sol: SuspensionSolenoid, measure: Optional[AtomicMeasure] = None) -> HomologyVector:
    """Ψ(μ) = ∫ φ_T dμ, non normalisé (linéaire en μ); mesure de la base par défaut"""
    if measure is None:
        return HomologyVector(sol.phi.integral(sol.base))
    return HomologyVector(measure.integrate(sol.phi))


def _roof_mass(sol: SuspensionSolenoid, measure: Optional[AtomicMeasure]) -> float:
    if measure is None:
        mass = float(sol.roof.integral(sol.base)[0])
    else:
        mass = float(measure.integrate(sol.roof)[0])
    if not mass > 0:
        raise DomainError(f"∫ l_T dμ non positive: {mass}")
    return mass


def ruelle_sullivan_class(sol: SuspensionSolenoid, measure: Optional[AtomicMeasure] = None) -> HomologyVector:
    """
    Classe de Ruelle-Sullivan (∫ φ_T dμ) / (∫ l_T dμ), normalisée à μ(S) = 1.

    Args:
        sol: Solénoïde
        measure: Mesure invariante (mesure de la base si None)

    Returns:
        HomologyVector
    """
    return ruelle_sullivan_map(sol, measure).scaled(1.0 / _roof_mass(sol, measure))


def realize_as_torus_flow(alpha: float, parametrization: str = 'time',
                          y0: float = 0.0) -> Tuple[LiftedCurve, SuspensionSolenoid]:
    """
    Flot linéaire c̃(t) = (0, y0) + t·(1, α) sur T², transversale {x1 = 0}.
    Retour R(y) = y + α, φ_T = (1, 1) sur [1-α, 1) et (1, 0) ailleurs,
    l_T = 1 (temps) ou √(1 + α²) (abscisse curviligne).

    Returns:
        (courbe relevée, SuspensionSolenoid associé)
    """
    if parametrization not in ('time', 'arclength'):
        raise DomainError(f"Paramétrage inconnu: {parametrization}")
    base = CircleRotation(alpha)
    a = base.alpha
    length = 1.0 if parametrization == 'time' else math.hypot(1.0, a)
    curve = linear_flow_curve(np.array([1.0, a]) / length, np.array([0.0, float(y0) % 1.0]))
    phi = PiecewiseConstantWeight(((1.0 - a, 1.0),), np.array([[1.0, 1.0]]), np.array([1.0, 0.0]))
    sol = SuspensionSolenoid(base, PiecewiseConstantWeight.constant([length]), phi,
                             realization={'alpha': a, 'parametrization': parametrization})
    return curve, sol


def _ratio_sums(phi_values: np.ndarray, roof_values: np.ndarray, n: int) -> np.ndarray:
    num = np.array([math.fsum(phi_values[:n, j]) for j in range(phi_values.shape[1])])
    return num / math.fsum(roof_values[:n])


def leaf_schwartzman_class(sol: SuspensionSolenoid, x0, N: int, tol: Optional[float] = None,
                           cross_check: bool = True, routes: Sequence[str] = ('loop',)):
    """
    Classe de la feuille de x0: Σ φ_T / Σ l_T sur N retours, stabilisée sur N/4, N/2, N.
    Avec une réalisation géométrique, chaque voie de routes ('loop' par défaut, 'cross'
    pour le comptage des croisements) est recalculée sur la courbe réalisée, mêmes fenêtres.

    Returns:
        AsymptoticEstimate ou NotConvergent
    """
    if N < 8:
        raise DomainError(f"N doit être >= 8, reçu {N}")
    tol = get_config().CONVERGENCE_TOL if tol is None else tol
    if isinstance(sol.base, CircleRotation):
        approx = sol.base.near_rational(N)
        if approx is not None:
            logger.warning(f"Nombre de rotation {sol.base.alpha} proche de {approx} à l'échelle N={N}")
    phi_values, roof_values = sol.orbit_weights(x0, N)
    sizes = (N // 4, N // 2, N)
    values = np.vstack([_ratio_sums(phi_values, roof_values, n) for n in sizes])
    residual = max(float(np.linalg.norm(a - b)) for i, a in enumerate(values) for b in values[i + 1:])
    windows = tuple((0.0, math.fsum(roof_values[:n])) for n in sizes)

    cross_checks = {}
    if cross_check and sol.realization:
        seed = float(sol.base.coordinates(sol.base.seed_state(x0)))
        curve, _ = realize_as_torus_flow(sol.realization['alpha'], sol.realization['parametrization'], seed)
        schedule = WindowSchedule.explicit(windows)
        for route in routes:
            cross_checks[route] = route_estimate(curve, TorusGeometry.flat(2), route, schedule, tol=tol)

    if residual > tol:
        logger.warning(f"Feuille de {x0}: pas de stabilisation (écart {residual:.3g} > {tol})")
        return NotConvergent(route='birkhoff', diameter=residual, last_values=values,
                             message=f"Sommes de Birkhoff non stabilisées à N={N}",
                             cross_checks=cross_checks)
    return AsymptoticEstimate(
        value=HomologyVector(values[-1]),
        route='birkhoff',
        residual=residual,
        converged=True,
        windows=windows,
        window_values=values,
        cross_checks=cross_checks,
    )


def measured_class_report(sol: SuspensionSolenoid, seeds: Sequence[float], N: int,
                          tol: Optional[float] = None, threads: int = 1) -> MeasuredClassReport:
    """Classe de Ruelle-Sullivan et classes des feuilles sur une grille de graines"""
    rs = ruelle_sullivan_class(sol)
    leaves = parallel_map(lambda seed: leaf_schwartzman_class(sol, seed, N, tol), seeds, threads)
    deviations = []
    for leaf in leaves:
        value = leaf.value if isinstance(leaf, AsymptoticEstimate) else HomologyVector(leaf.last_values[-1])
        deviations.append(value.distance(rs))
    logger.info(f"Solénoïde: {len(seeds)} graine(s), écart max à Ruelle-Sullivan {max(deviations):.3g}")
    return MeasuredClassReport(rs_class=rs, normalization=_roof_mass(sol, None), seeds=list(seeds),
                               leaf_classes=leaves, max_deviation=max(deviations))


def empirical_transversal_measure(sol: SuspensionSolenoid, seed, N: int) -> Tuple[AtomicMeasure, float]:
    """
    Distribution empirique des retours pondérée par l_T et distance à l_T·μ / ∫ l_T dμ
    (écart maximal sur les intervalles [0, k/64)).

    Returns:
        (AtomicMeasure de masse 1, distance)
    """
    if N < 1:
        raise DomainError(f"N doit être >= 1, reçu {N}")
    coords = sol.base.coordinates(sol.base.orbit(sol.base.seed_state(seed), N))
    lengths = sol.roof(coords)[:, 0]
    atoms, inverse = np.unique(coords, return_inverse=True)
    weights = np.bincount(inverse, weights=lengths) / math.fsum(lengths)
    empirical = AtomicMeasure(atoms, weights)
    total = float(sol.roof.integral(sol.base)[0])
    sets = get_config().MEASURE_TEST_SETS
    distance = 0.0
    for k in range(1, sets + 1):
        edge = k / sets
        target = float(sol.roof.interval_integral(sol.base, 0.0, edge)[0]) / total
        distance = max(distance, abs(empirical.interval_measure(0.0, edge) - target))
    return empirical, distance


def slab_chain_windows(forward: np.ndarray, backward: np.ndarray, radius: float, fraction: float,
                       forward_diameters: Optional[np.ndarray] = None,
                       backward_diameters: Optional[np.ndarray] = None) -> Dict[str, Any]:
    """
    Fenêtres de tranches pour la boule de rayon R centrée au point base (fraction u de la tranche 0).
    forward: coûts de traversée w_0, w_1, ...; backward: coûts des tranches -1, -2, ...
    Une tranche est contenue si distance proche + diamètre <= R, rencontrée si distance proche <= R.

    Returns:
        {'inner': (a, b) ou None, 'outer': (a', b')}
    """
    d_f = forward if forward_diameters is None else forward_diameters
    d_b = backward if backward_diameters is None else backward_diameters
    near_f = np.concatenate([[0.0], (1.0 - fraction) * forward[0] + np.concatenate([[0.0], np.cumsum(forward[1:-1])])])
    near_b = fraction * forward[0] + np.concatenate([[0.0], np.cumsum(backward[:-1])])
    if near_f[-1] <= radius or near_b[-1] <= radius:
        raise DomainError(f"Orbite trop courte pour le rayon {radius}")

    def prefix(mask: np.ndarray) -> int:
        return int(np.argmin(mask)) if not mask.all() else int(mask.size)

    met_f = prefix(near_f <= radius)
    met_b = prefix(near_b <= radius)
    outer = (-met_b, met_f)
    if max(fraction, 1.0 - fraction) * d_f[0] > radius:
        return {'inner': None, 'outer': outer}
    inside_f = prefix(near_f[1:] + d_f[1:near_f.size] <= radius) + 1
    inside_b = prefix(near_b + d_b[:near_b.size] <= radius)
    return {'inner': (-inside_b, inside_f), 'outer': outer}


def _orbit_lengths(sol: SuspensionSolenoid, seed, count: int) -> Tuple[np.ndarray, np.ndarray]:
    base = sol.base
    state = base.seed_state(seed)
    forward = sol.roof(base.coordinates(base.orbit(state, count)))[:, 0]
    backward = sol.roof(base.coordinates(base.backward_orbit(state, count)))[:, 0]
    return forward, backward


def controlled_growth_ratio(sol: SuspensionSolenoid, seed, radii: Sequence[float],
                            fraction: float = 0.5) -> List[Dict[str, Any]]:
    """
    Vol(tranches partielles) / Vol(tranches contenues) pour les boules de feuille de rayons donnés.
    Feuille compacte (base périodique) entièrement couverte: rapport 0.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("Les rayons doivent croître strictement")
    low, _ = sol.roof.bounds()
    count = int(math.ceil(radii[-1] / low)) + 3
    forward, backward = _orbit_lengths(sol, seed, count)
    period_length = None
    if isinstance(sol.base, FiniteSystem):
        period = sol.base.period(sol.base.seed_state(seed))
        period_length = math.fsum(forward[:period])

    rows = []
    for r in radii:
        if period_length is not None and 2.0 * r >= period_length:
            rows.append({'radius': r, 'inner': None, 'outer': None, 'inner_volume': period_length,
                         'partial_volume': 0.0, 'ratio': 0.0})
            continue
        windows = slab_chain_windows(forward, backward, r, fraction)
        volume = _window_volume(forward, backward, windows['outer'])
        inner = windows['inner']
        inner_volume = _window_volume(forward, backward, inner) if inner else 0.0
        partial = volume - inner_volume
        rows.append({'radius': r, 'inner': inner, 'outer': windows['outer'], 'inner_volume': inner_volume,
                     'partial_volume': partial, 'ratio': partial / inner_volume if inner_volume > 0 else None})
    return rows


def _window_volume(forward: np.ndarray, backward: np.ndarray, window: Tuple[int, int]) -> float:
    a, b = window
    return math.fsum(forward[:b]) + math.fsum(backward[:-a]) if a < 0 else math.fsum(forward[:b])


def solenoid_cluster(sol: SuspensionSolenoid, seeds: Sequence[float], N: int,
                     windows: Optional[Sequence[int]] = None) -> PointSet:
    """Classes fenêtrées Σφ/Σl des feuilles de plusieurs graines (ensemble dérivé échantillonné)"""
    sizes = list(windows) if windows else [N // 8, N // 4, N // 2, N]
    if min(sizes) < 1 or max(sizes) > N:
        raise DomainError(f"Fenêtres hors de [1, {N}]: {sizes}")
    points, provenance = [], []
    for seed in seeds:
        phi_values, roof_values = sol.orbit_weights(seed, N)
        for n in sizes:
            points.append(_ratio_sums(phi_values, roof_values, n))
            provenance.append((0.0, float(n)))
    return PointSet(np.vstack(points), np.array(provenance))


def cluster_inclusion_check(sol: SuspensionSolenoid, seeds: Sequence[float], N: int,
                            measures: Sequence[AtomicMeasure], tol: float) -> Dict[str, Any]:
    """
    Chaque classe de feuille échantillonnée doit être à tol près de l'enveloppe convexe
    des classes de Ruelle-Sullivan normalisées des mesures invariantes fournies.
    """
    if not measures:
        raise DomainError("Aucune mesure invariante fournie")
    targets = PointSet(np.vstack([ruelle_sullivan_class(sol, m).coords for m in measures]))
    cloud = solenoid_cluster(sol, seeds, N, [N])
    worst, worst_point = 0.0, None
    for p in cloud.vectors():
        _, dist = hull_membership(p, targets, tol)
        if worst_point is None or dist > worst:
            worst, worst_point = dist, p.coords.tolist()
    return {
        'success': worst <= tol,
        'targets': targets.points.tolist(),
        'worst_distance': worst,
        'worst_point': worst_point,
        'points': len(cloud),
    }
