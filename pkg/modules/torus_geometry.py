"""
Géométrie des tores plats R^n/Z^n (métrique de Gram) et de leurs perturbations conformes
Relevés, projections, segments de fermeture, longueurs et diamètre
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.spatial import HalfspaceIntersection, QhullError

from models import ClosingPath
from modules.errors import DomainError, StructuralError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """
    Polynôme trigonométrique réel Z^n-périodique
    Σ a_k cos 2π<k,x> + b_k sin 2π<k,x>, fréquences entières uniquement
    """
    frequencies: np.ndarray
    cos_amps: np.ndarray
    sin_amps: np.ndarray

    def __post_init__(self):
        K = np.array(self.frequencies, dtype=float)
        if K.ndim != 2:
            raise StructuralError(f"Fréquences de forme invalide: {K.shape}")
        if not np.array_equal(K, np.round(K)):
            raise DomainError("Fréquences non entières: u ne serait pas Z^n-périodique")
        a = np.array(self.cos_amps, dtype=float).reshape(-1)
        b = np.array(self.sin_amps, dtype=float).reshape(-1)
        if a.size != K.shape[0] or b.size != K.shape[0]:
            raise StructuralError("Nombre d'amplitudes différent du nombre de fréquences")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("Amplitudes non finies")
        for name, arr in (('frequencies', K), ('cos_amps', a), ('sin_amps', b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_terms(cls, dim: int, terms: Sequence[Dict[str, Any]]) -> 'TrigPolynomial':
        """
        Construit depuis des termes {"k": [...], "amp": a, "sin": b, "phase": φ}.
        amp·cos(2π<k,x> + 2πφ) est développé en amplitudes cos/sin.
        """
        K, a, b = [], [], []
        for term in terms:
            k = list(term['k'])
            if len(k) != dim:
                raise StructuralError(f"Fréquence {k} de dimension {len(k)}, attendu {dim}")
            amp = float(term.get('amp', 0.0))
            phase = 2.0 * math.pi * float(term.get('phase', 0.0))
            K.append(k)
            a.append(amp * math.cos(phase))
            b.append(float(term.get('sin', 0.0)) - amp * math.sin(phase))
        if not K:
            return cls.zero(dim)
        return cls(np.array(K), np.array(a), np.array(b))

    @classmethod
    def constant(cls, dim: int, value: float) -> 'TrigPolynomial':
        return cls(np.zeros((1, dim)), np.array([value]), np.array([0.0]))

    @classmethod
    def zero(cls, dim: int) -> 'TrigPolynomial':
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros(0))

    @property
    def dim(self) -> int:
        return int(self.frequencies.shape[1])

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.cos_amps) or np.any(self.sin_amps))

    def _phase(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * np.pi * (np.asarray(x, dtype=float) @ self.frequencies.T)

    def value(self, x) -> np.ndarray:
        """Valeur en x de forme (..., n)"""
        theta = self._phase(x)
        return np.cos(theta) @ self.cos_amps + np.sin(theta) @ self.sin_amps

    def gradient(self, x) -> np.ndarray:
        """Gradient en x de forme (..., n)"""
        theta = self._phase(x)
        coeff = -np.sin(theta) * self.cos_amps + np.cos(theta) * self.sin_amps
        return 2.0 * np.pi * (coeff @ self.frequencies)

    def bound(self) -> float:
        """Majorant certifié de |u|"""
        return float(np.sum(np.hypot(self.cos_amps, self.sin_amps)))

    def mean(self) -> float:
        """Moyenne sur le tore (termes de fréquence nulle)"""
        zero = np.all(self.frequencies == 0, axis=1)
        return float(np.sum(self.cos_amps[zero]))

    def interval_integral(self, a: float, b: float) -> float:
        """Intégrale exacte sur [a, b] (cas n = 1)"""
        if self.dim != 1:
            raise StructuralError("Intégrale d'intervalle définie pour n = 1 seulement")
        total = 0.0
        for k, ca, sa in zip(self.frequencies[:, 0], self.cos_amps, self.sin_amps):
            if k == 0:
                total += ca * (b - a)
            else:
                w = 2.0 * math.pi * k
                total += ca * (math.sin(w * b) - math.sin(w * a)) / w
                total -= sa * (math.cos(w * b) - math.cos(w * a)) / w
        return float(total)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'terms': [
                {'k': [int(v) for v in k], 'amp': float(a), 'sin': float(b)}
                for k, a, b in zip(self.frequencies, self.cos_amps, self.sin_amps)
            ]
        }


@dataclass(frozen=True, eq=False)
class TorusGeometry:
    """Tore R^n/Z^n muni de e^{2u}·(forme de Gram)"""
    gram: np.ndarray
    conformal: Optional[TrigPolynomial] = None
    cholesky: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        G = np.array(self.gram, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 1:
            raise StructuralError(f"Matrice de Gram de forme invalide: {G.shape}")
        if not np.allclose(G, G.T, rtol=0.0, atol=1e-12):
            raise DomainError("Matrice de Gram non symétrique")
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError as e:
            raise DomainError(f"Matrice de Gram non définie positive: {e}")
        if self.conformal is not None and self.conformal.dim != G.shape[0]:
            raise StructuralError("Dimension du facteur conforme incompatible")
        G.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, 'gram', G)
        object.__setattr__(self, 'cholesky', L)

    @classmethod
    def flat(cls, dim: int) -> 'TorusGeometry':
        return cls(np.eye(dim))

    @classmethod
    def from_descriptor(cls, descriptor: Dict[str, Any]) -> 'TorusGeometry':
        """Depuis {"dim": n, "gram": [[...]], "conformal": [{"k": [...], "amp": a}, ...]}"""
        dim = int(descriptor['dim'])
        gram = np.array(descriptor.get('gram', np.eye(dim)), dtype=float)
        terms = descriptor.get('conformal') or []
        conformal = TrigPolynomial.from_terms(dim, terms) if terms else None
        return cls(gram, conformal)

    @property
    def dim(self) -> int:
        return int(self.gram.shape[0])

    @property
    def is_flat(self) -> bool:
        return self.conformal is None or self.conformal.is_zero

    @property
    def conformal_bound(self) -> float:
        return 0.0 if self.is_flat else self.conformal.bound()

    def conformal_factor(self, x) -> np.ndarray:
        """e^{u(x)} (facteur des longueurs)"""
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.ones(x.shape[:-1])
        return np.exp(self.conformal.value(x))

    def flat_norm(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.einsum('...i,ij,...j->...', v, self.gram, v))

    def to_dict(self) -> Dict[str, Any]:
        data = {'dim': self.dim, 'gram': self.gram.tolist()}
        if self.conformal is not None:
            data['conformal'] = self.conformal.to_dict()['terms']
        return data


def project(lift) -> np.ndarray:
    """
    Réduction coordonnée par coordonnée modulo 1, dans [0, 1).

    Args:
        lift: Point(s) de R^n, forme (..., n)

    Returns:
        Point(s) du tore
    """
    x = np.asarray(lift, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Coordonnées non finies")
    reduced = x - np.floor(x)
    # -1e-17 - floor(-1e-17) s'arrondit à 1.0
    return np.where(reduced >= 1.0, 0.0, reduced)


def _translates(dim: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 0, 1), repeat=dim)), dtype=float)


def closing_displacements(geom: TorusGeometry, P, Q, scheme: str = 'shortest') -> np.ndarray:
    """
    Déplacements relevés des segments de fermeture de proj(P) vers proj(Q), vectorisé.

    Args:
        geom: Géométrie
        P: Points de départ (relevés), forme (m, n)
        Q: Points d'arrivée (relevés), forme (m, n)
        scheme: 'shortest' (meilleur des 3^n translatés, longueur de Gram)
                ou 'chart' (segment dans le domaine fondamental [0,1)^n)

    Returns:
        Déplacements w de forme (m, n), proj(P) + w ≡ proj(Q)
    """
    p = project(np.atleast_2d(P))
    q = project(np.atleast_2d(Q))
    base = q - p
    if scheme == 'chart':
        return base
    if scheme != 'shortest':
        raise DomainError(f"Schéma de fermeture inconnu: {scheme}")
    translates = _translates(geom.dim)
    candidates = base[:, None, :] + translates[None, :, :]
    lengths = geom.flat_norm(candidates)
    idx = np.argmin(lengths, axis=1)
    return candidates[np.arange(candidates.shape[0]), idx]


def shortest_closing(geom: TorusGeometry, p, q, quadrature_step: float = 1e-3) -> ClosingPath:
    """
    Segment droit de p vers le translaté de q le plus proche (longueur de Gram)
    parmi les 3^n translatés voisins; sous perturbation conforme le même segment
    est conservé et sa longueur perturbée est rapportée.

    Args:
        geom: Géométrie
        p: Point du tore
        q: Point du tore
        quadrature_step: Pas de quadrature du facteur conforme

    Returns:
        ClosingPath
    """
    start = project(np.asarray(p, dtype=float))
    w = closing_displacements(geom, start[None, :], np.asarray(q, dtype=float)[None, :])[0]
    points = np.vstack([start, start + w])
    flat = float(geom.flat_norm(w))
    length = flat if geom.is_flat else path_length(geom, points, quadrature_step)
    return ClosingPath(points=points, length=length, flat_length=flat)


def path_length(geom: TorusGeometry, polyline, quadrature_step: float = 1e-3) -> float:
    """
    Longueur d'une ligne brisée relevée; exacte dans le cas plat,
    règle du point milieu composite au pas quadrature_step sinon.

    Args:
        geom: Géométrie
        polyline: Points relevés, forme (m, n), m >= 2
        quadrature_step: Pas de quadrature

    Returns:
        Longueur (unités métriques)
    """
    pts = np.asarray(polyline, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DomainError("Au moins deux points requis")
    if pts.shape[1] != geom.dim:
        raise StructuralError(f"Points de dimension {pts.shape[1]}, attendu {geom.dim}")
    seg = np.diff(pts, axis=0)
    flat = geom.flat_norm(seg)
    if geom.is_flat:
        return float(math.fsum(flat))
    total = []
    for start, d, length in zip(pts[:-1], seg, flat):
        if length == 0.0:
            continue
        m = max(1, int(math.ceil(length / quadrature_step)))
        tau = (np.arange(m) + 0.5) / m
        mids = start[None, :] + tau[:, None] * d[None, :]
        total.append(length * float(np.mean(geom.conformal_factor(mids))))
    return float(math.fsum(total))


def segment_lengths(geom: TorusGeometry, starts: np.ndarray, ends: np.ndarray,
                    subdivisions: int) -> np.ndarray:
    """Longueurs de plusieurs segments par point milieu à nombre fixe de sous-intervalles"""
    d = ends - starts
    flat = geom.flat_norm(d)
    if geom.is_flat:
        return flat
    tau = (np.arange(subdivisions) + 0.5) / subdivisions
    mids = starts[:, None, :] + tau[None, :, None] * d[:, None, :]
    return flat * np.mean(geom.conformal_factor(mids), axis=1)


def flat_diameter(geom: TorusGeometry) -> float:
    """Rayon de recouvrement du réseau Z^n pour la forme de Gram (cellule de Voronoï)"""
    n = geom.dim
    if n == 1:
        return 0.5 * math.sqrt(float(geom.gram[0, 0]))
    # coordonnées de Cholesky: |x|_G = |L^T x|
    lattice = np.array([g for g in itertools.product(range(-2, 3), repeat=n) if any(g)], dtype=float)
    vectors = lattice @ geom.cholesky
    halfspaces = np.hstack([vectors, -0.5 * np.sum(vectors ** 2, axis=1)[:, None]])
    try:
        cell = HalfspaceIntersection(halfspaces, np.zeros(n))
    except QhullError as e:
        logger.warning(f"Cellule de Voronoï indisponible, recherche sur grille: {e}")
        return _grid_covering_radius(geom, lattice)
    return float(np.max(np.linalg.norm(cell.intersections, axis=1)))


def _grid_covering_radius(geom: TorusGeometry, lattice: np.ndarray, resolution: int = 64) -> float:
    axes = [np.linspace(0.0, 1.0, resolution + 1)] * geom.dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, geom.dim)
    shifts = np.vstack([np.zeros((1, geom.dim)), lattice])
    dist = geom.flat_norm(grid[:, None, :] - shifts[None, :, :]).min(axis=1)
    return float(dist.max())


def torus_diameter(geom: TorusGeometry) -> Dict[str, float]:
    """
    Diamètre du tore et constante C0 = 2·diamètre.
    Cas conforme: majorant certifié diamètre_plat · max e^u.

    Returns:
        {'diameter', 'C0', 'certified_upper_bound'}
    """
    flat = flat_diameter(geom)
    if geom.is_flat:
        return {'diameter': flat, 'C0': 2.0 * flat, 'certified_upper_bound': False}
    diameter = flat * math.exp(geom.conformal_bound)
    return {'diameter': diameter, 'C0': 2.0 * diameter, 'certified_upper_bound': True}

