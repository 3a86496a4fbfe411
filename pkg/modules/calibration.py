"""
Fonctions calibrantes Φ: R^n -> H_1(T^n, R) = R^n
Calibrant identité, partition de l'unité à support compact, incréments et classes de lacets
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from config import get_config
from models import HomologyVector, IntegralClass
from modules.errors import ConsistencyError, ConstructionError, DomainError, NumericalCoverError
from modules.torus_geometry import TorusGeometry, project
from modules.trajectories import LiftedCurve

logger = logging.getLogger(__name__)

BUMPS = ('tent', 'cosine')


def _bump_1d(kind: str, x: np.ndarray, radius: float) -> np.ndarray:
    r = np.abs(x) / radius
    if kind == 'tent':
        return np.maximum(0.0, 1.0 - r)
    return np.where(r < 1.0, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 2, 0.0)


@dataclass(frozen=True, eq=False)
class CalibratingFunction:
    """
    Fonction Z^n-équivariante Φ(x + g) = Φ(x) + g avec Φ(x̃0) = 0.
    Pour 'partition', Φ(x) = Σ_g ψ_g(x)·g avec ψ_g = φ(x - g) / Σ_h φ(x - h),
    φ bosse produit centrée en x̃0.
    """
    kind: str
    dim: int
    bump: str = 'tent'
    radius: float = 1.0
    basepoint: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError(f"Dimension invalide: {self.dim}")
        if self.kind not in ('identity', 'partition'):
            raise DomainError(f"Type de calibrant inconnu: {self.kind}")
        base = np.zeros(self.dim) if self.basepoint is None else np.array(self.basepoint, dtype=float)
        if base.shape != (self.dim,):
            raise DomainError(f"Point base de forme {base.shape}, attendu ({self.dim},)")
        base.setflags(write=False)
        object.__setattr__(self, 'basepoint', base)
        if self.kind == 'partition':
            if self.bump not in BUMPS:
                raise DomainError(f"Bosse inconnue: {self.bump}")
            # recouvrement: rayon > 1/2; φ nulle aux autres translatés de x̃0: rayon <= 1
            if not 0.5 < self.radius <= 1.0:
                raise ConstructionError(
                    f"Rayon de support {self.radius} hors de ]1/2, 1]: recouvrement ou normalisation impossible")

    @classmethod
    def from_descriptor(cls, dim: int, descriptor: Dict[str, Any]) -> 'CalibratingFunction':
        kind = descriptor.get('type', 'identity')
        if kind == 'identity':
            return identity_calibrator(dim)
        return partition_calibrator(dim, bump=descriptor.get('bump', 'tent'),
                                    radius=float(descriptor.get('radius', 1.0)),
                                    basepoint=descriptor.get('basepoint'))

    def _coordinate_weights(self, y: np.ndarray):
        base = np.floor(y)
        frac = y - base
        reach = int(math.ceil(self.radius))
        offsets = np.arange(-reach, reach + 2, dtype=float)
        weights = _bump_1d(self.bump, frac[..., None] - offsets, self.radius)
        return base, offsets, weights

    def denominator(self, x) -> np.ndarray:
        """Σ_g φ(x - g) (produit des sommes par coordonnée)"""
        if self.kind == 'identity':
            return np.ones(np.asarray(x).shape[:-1])
        y = np.asarray(x, dtype=float) - self.basepoint
        _, _, weights = self._coordinate_weights(y)
        return np.prod(weights.sum(axis=-1), axis=-1)

    def _raw(self, y: np.ndarray) -> np.ndarray:
        base, offsets, weights = self._coordinate_weights(y)
        sums = weights.sum(axis=-1)
        small = np.prod(sums, axis=-1) < get_config().DENOMINATOR_FLOOR
        if np.any(small):
            raise NumericalCoverError(
                f"Dénominateur de partition sous {get_config().DENOMINATOR_FLOOR} "
                f"en {int(np.sum(small))} point(s)")
        # la bosse est un produit: Φ se calcule coordonnée par coordonnée
        return base + (weights @ offsets) / sums

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DomainError(f"Point de dimension {x.shape[-1]}, attendu {self.dim}")
        if self.kind == 'identity':
            return x - self.basepoint
        y = x - self.basepoint
        return self._raw(y) - self._raw(np.zeros(self.dim))

    def to_dict(self) -> Dict[str, Any]:
        data = {'type': self.kind, 'basepoint': self.basepoint.tolist()}
        if self.kind == 'partition':
            data.update({'bump': self.bump, 'radius': self.radius})
        return data


def identity_calibrator(n: int) -> CalibratingFunction:
    """Φ(x̃) = x̃ sur le revêtement universel de T^n"""
    return CalibratingFunction('identity', n)


def partition_calibrator(n: int, bump: str = 'tent', radius: float = 1.0,
                         basepoint=None) -> CalibratingFunction:
    """
    Calibrant par partition de l'unité; vérifie le recouvrement sur une grille.

    Args:
        n: Dimension du tore
        bump: 'tent' (max(0, 1 - |x|/ρ)) ou 'cosine' (cos²(π|x|/2ρ))
        radius: Rayon de support ρ de la bosse 1-d
        basepoint: Point base x̃0 (Φ(x̃0) = 0)

    Returns:
        CalibratingFunction de type 'partition'
    """
    phi = CalibratingFunction('partition', n, bump=bump, radius=radius, basepoint=basepoint)
    cfg = get_config()
    per_axis = max(2, min(cfg.CALIBRATOR_COVER_GRID, int(200000 ** (1.0 / n))))
    axis = np.arange(per_axis) / per_axis
    grid = np.stack(np.meshgrid(*([axis] * n), indexing='ij'), axis=-1).reshape(-1, n)
    dens = phi.denominator(grid + phi.basepoint)
    if np.min(dens) <= 0.0:
        raise ConstructionError(f"La projection du support de la bosse ne recouvre pas T^{n}")
    for g in itertools.product((-1, 0, 1), repeat=n):
        if any(g):
            weight = np.prod(_bump_1d(bump, np.array(g, dtype=float), radius))
            if weight > 0.0:
                raise ConstructionError(f"La bosse ne s'annule pas au translaté {g} du point base")
    logger.debug(f"Calibrant partition construit (bosse {bump}, rayon {radius}, "
                 f"dénominateur min {np.min(dens):.3g})")
    return phi


def equivariance_residual(phi: CalibratingFunction, count: int = 1000, seed: int = 0,
                          spread: float = 10.0) -> float:
    """max |Φ(x + g) - Φ(x) - g| sur des couples (x, g) tirés au hasard"""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-spread, spread, size=(count, phi.dim))
    g = rng.integers(-5, 6, size=(count, phi.dim)).astype(float)
    return float(np.max(np.abs(phi(x + g) - phi(x) - g)))


def lipschitz_constant(phi: CalibratingFunction, geom: TorusGeometry,
                       samples: int = 2000, seed: int = 0) -> float:
    """
    Estimation échantillonnée de C avec |Φ(γ)| <= C·l(γ), gonflée de 10 %.
    Norme d'opérateur de la jacobienne (différences finies) contre la métrique e^u·G.
    """
    if geom.dim != phi.dim:
        raise DomainError("Dimensions du calibrant et de la géométrie différentes")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(samples, phi.dim)) + phi.basepoint
    h = 1e-6
    columns = [(phi(x + h * e) - phi(x - h * e)) / (2.0 * h) for e in np.eye(phi.dim)]
    jac = np.stack(columns, axis=-1)
    # |v|_G = |L^T v|: norme de J·L^{-T}
    inv_lt = np.linalg.inv(geom.cholesky.T)
    norms = np.linalg.norm(jac @ inv_lt, ord=2, axis=(1, 2))
    scale = math.exp(geom.conformal_bound)
    constant = 1.1 * float(np.max(norms)) * scale
    logger.debug(f"Constante de Lipschitz estimée: {constant:.4g} ({samples} points)")
    return constant


def curve_increment(phi: CalibratingFunction, curve: LiftedCurve, s: float, t: float,
                    verify_lift: bool = False) -> HomologyVector:
    """
    Φ(c̃(t)) - Φ(c̃(s))

    Args:
        phi: Calibrant
        curve: Courbe relevée
        s: Début (s <= t)
        t: Fin
        verify_lift: Recalcule avec un relevé translaté par un élément du réseau

    Returns:
        HomologyVector
    """
    if s > t:
        raise DomainError(f"Fenêtre inversée: s={s} > t={t}")
    ends = curve(np.array([s, t]))
    values = phi(ends)
    increment = values[1] - values[0]
    if verify_lift:
        shift = np.arange(1, curve.dim + 1, dtype=float) * 3.0
        shifted = phi(ends + shift)
        gap = float(np.max(np.abs(shifted[1] - shifted[0] - increment)))
        if gap > 1e-9 * (1.0 + float(np.max(np.abs(increment)))):
            raise ConsistencyError(f"Incrément dépendant du relevé (écart {gap:.3g})")
    return HomologyVector(increment)


def loop_class(phi: CalibratingFunction, samples) -> IntegralClass:
    """
    Classe entière d'un lacet échantillonné (relevé), par l'incrément du calibrant.

    Args:
        phi: Calibrant
        samples: Points relevés (m, n), premier et dernier se projetant au même point

    Returns:
        IntegralClass
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    cfg = get_config()
    gap = project(pts[-1]) - project(pts[0])
    gap = gap - np.round(gap)
    if float(np.max(np.abs(gap))) > cfg.LOOP_CLOSURE_TOL:
        raise DomainError(f"Échantillon non fermé sur le tore (écart {np.max(np.abs(gap)):.3g})")
    values = phi(pts[[0, -1]])
    increment = values[1] - values[0]
    rounded = np.round(increment)
    defect = float(np.max(np.abs(increment - rounded)))
    if defect > cfg.INTEGRALITY_TOL:
        raise ConsistencyError(f"Classe de lacet non entière (écart {defect:.3g})")
    return IntegralClass(rounded)


def calibrator_difference_bound(phi1: CalibratingFunction, phi2: CalibratingFunction,
                                grid: int = 32) -> float:
    """max |Φ1 - Φ2| sur une grille du domaine fondamental (la différence est périodique)"""
    if phi1.dim != phi2.dim:
        raise DomainError("Calibrants de dimensions différentes")
    n = phi1.dim
    per_axis = max(2, min(grid, int(100000 ** (1.0 / n))))
    axis = np.arange(per_axis) / per_axis
    pts = np.stack(np.meshgrid(*([axis] * n), indexing='ij'), axis=-1).reshape(-1, n)
    return float(np.max(np.linalg.norm(phi1(pts) - phi2(pts), axis=1)))
