"""
Arithmétique et géométrie des classes d'homologie réelles
Combinaisons linéaires, enveloppes additives, enveloppes convexes et cônes
"""
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from models import ConeReport, HomologyVector, PointSet
from modules.errors import DomainError, StructuralError

logger = logging.getLogger(__name__)

# Budget fixe d'itérations du gradient projeté (rang > 3)
PROJECTED_GRADIENT_ITERATIONS = 5000


def combine(terms: Sequence[Tuple[float, HomologyVector]]) -> HomologyVector:
    """
    Combinaison linéaire Σ c_i · v_i, sommée coordonnée par coordonnée avec fsum
    (résultat indépendant de l'ordre des termes).

    Args:
        terms: Liste de couples (scalaire, HomologyVector)

    Returns:
        HomologyVector
    """
    if not terms:
        raise DomainError("Combinaison vide")
    rank = terms[0][1].rank
    for _, vector in terms:
        if vector.rank != rank:
            raise StructuralError(f"Rangs incompatibles dans la combinaison: {rank} et {vector.rank}")
    coords = [math.fsum(float(c) * float(v.coords[i]) for c, v in terms) for i in range(rank)]
    return HomologyVector(np.array(coords))


def _check_pair(A: PointSet, B: PointSet) -> None:
    if A.is_empty() or B.is_empty():
        raise DomainError("Enveloppe additive d'un ensemble vide")
    if A.rank != B.rank:
        raise StructuralError(f"Rangs incompatibles: {A.rank} et {B.rank}")


def _unique_rows(points: np.ndarray) -> np.ndarray:
    """Supprime les doublons exacts en conservant l'ordre d'apparition"""
    seen = set()
    keep = []
    for i, row in enumerate(points):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return points[keep]


def additive_hull_sample(A: PointSet, B: PointSet, samples_per_segment: int) -> PointSet:
    """
    Points régulièrement espacés sur chaque segment [a, b], a ∈ A, b ∈ B.
    Les extrémités (paramètres 0 et 1) sont reproduites exactement.

    Args:
        A: Premier ensemble
        B: Second ensemble
        samples_per_segment: Nombre de points par segment (>= 2)

    Returns:
        PointSet contenant A ∪ B
    """
    _check_pair(A, B)
    if samples_per_segment < 2:
        raise DomainError(f"Au moins 2 points par segment requis, reçu {samples_per_segment}")
    tau = np.linspace(0.0, 1.0, samples_per_segment)
    a = A.points[:, None, None, :]
    b = B.points[None, :, None, :]
    t = tau[None, None, :, None]
    # (1 - τ)a + τb donne a et b exactement aux extrémités
    segment_points = (1.0 - t) * a + t * b
    points = segment_points.reshape(-1, A.rank)
    return PointSet(_unique_rows(points))


def segment_distance(p: HomologyVector, A: PointSet, B: PointSet) -> Tuple[float, int, int, float]:
    """
    Distance exacte de p à l'enveloppe additive ⋃[a, b].

    Returns:
        (distance, indice de a, indice de b, paramètre τ du point le plus proche)
    """
    _check_pair(A, B)
    if p.rank != A.rank:
        raise StructuralError(f"Rangs incompatibles: {p.rank} et {A.rank}")
    a = A.points[:, None, :]
    d = B.points[None, :, :] - a
    dd = np.einsum('ijk,ijk->ij', d, d)
    num = np.einsum('ijk,ijk->ij', p.coords[None, None, :] - a, d)
    with np.errstate(invalid='ignore', divide='ignore'):
        tau = np.where(dd > 0, num / np.where(dd > 0, dd, 1.0), 0.0)
    tau = np.clip(tau, 0.0, 1.0)
    closest = a + tau[:, :, None] * d
    dist = np.linalg.norm(closest - p.coords[None, None, :], axis=2)
    i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
    return float(dist[i, j]), int(i), int(j), float(tau[i, j])


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    dd = float(d @ d)
    tau = 0.0 if dd == 0.0 else min(1.0, max(0.0, float((p - a) @ d) / dd))
    return float(np.linalg.norm(a + tau * d - p))


def _point_triangle_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    e0, e1 = b - a, c - a
    normal = np.cross(e0, e1)
    nn = float(normal @ normal)
    if nn > 0.0:
        # projection sur le plan puis test barycentrique
        w = p - a
        offset = float(w @ normal) / nn
        q = w - offset * normal
        d00, d01, d11 = e0 @ e0, e0 @ e1, e1 @ e1
        d20, d21 = q @ e0, q @ e1
        denom = d00 * d11 - d01 * d01
        v = (d11 * d20 - d01 * d21) / denom
        u = (d00 * d21 - d01 * d20) / denom
        if v >= 0.0 and u >= 0.0 and u + v <= 1.0:
            return abs(offset) * math.sqrt(nn)
    return min(_point_segment_distance(p, a, b),
               _point_segment_distance(p, b, c),
               _point_segment_distance(p, a, c))


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Projection euclidienne sur le simplexe standard"""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u * k > css - 1.0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _hull_distance_inplane(y: np.ndarray, Y: np.ndarray) -> float:
    """Distance de y à conv(Y) dans un espace où Y est de dimension pleine"""
    dim = Y.shape[1]
    if dim == 1:
        lo, hi = Y[:, 0].min(), Y[:, 0].max()
        return float(max(0.0, lo - y[0], y[0] - hi))
    if dim in (2, 3):
        try:
            hull = ConvexHull(Y)
        except QhullError as e:
            logger.debug(f"Qhull en échec, bascule sur le gradient projeté: {e}")
            return _hull_distance_iterative(y, Y)
        scale = max(1.0, float(np.abs(Y).max()))
        if np.all(hull.equations[:, :-1] @ y + hull.equations[:, -1] <= 1e-12 * scale):
            return 0.0
        if dim == 2:
            return min(_point_segment_distance(y, Y[i], Y[j]) for i, j in hull.simplices)
        return min(_point_triangle_distance(y, Y[i], Y[j], Y[k]) for i, j, k in hull.simplices)
    return _hull_distance_iterative(y, Y)


def _hull_distance_iterative(y: np.ndarray, Y: np.ndarray) -> float:
    m = Y.shape[0]
    w = np.full(m, 1.0 / m)
    lipschitz = max(float(np.linalg.norm(Y, 2)) ** 2, 1e-300)
    step = 1.0 / lipschitz
    for _ in range(PROJECTED_GRADIENT_ITERATIONS):
        grad = Y @ (Y.T @ w - y)
        w = _project_simplex(w - step * grad)
    return float(np.linalg.norm(Y.T @ w - y))


def hull_membership(p: HomologyVector, S: PointSet, tol: float) -> Tuple[bool, float]:
    """
    Appartenance de p à l'enveloppe convexe de S, à tol près.
    Rang <= 3: énumération exacte des facettes; au-delà: gradient projeté.

    Args:
        p: Point testé
        S: Ensemble non vide
        tol: Tolérance

    Returns:
        (appartenance, distance)
    """
    if S.is_empty():
        raise DomainError("Enveloppe convexe d'un ensemble vide")
    if p.rank != S.rank:
        raise StructuralError(f"Rangs incompatibles: {p.rank} et {S.rank}")
    pts = S.points
    if np.any(np.all(pts == p.coords[None, :], axis=1)):
        return True, 0.0

    center = pts.mean(axis=0)
    X = pts - center
    q = p.coords - center
    _, sing, Vt = np.linalg.svd(X, full_matrices=False)
    cutoff = 1e-12 * max(1.0, float(sing[0]) if sing.size else 0.0)
    dim = int(np.sum(sing > cutoff))
    if dim == 0:
        distance = float(np.linalg.norm(q))
    else:
        U = Vt[:dim]
        coeff = U @ q
        perp = float(np.linalg.norm(q - U.T @ coeff))
        inplane = _hull_distance_inplane(coeff, X @ U.T)
        distance = math.hypot(inplane, perp)
    return distance <= tol, distance


def cone_from_samples(S: PointSet, angular_tol: float, zero_tol: float = 1e-12) -> ConeReport:
    """
    Regroupe les directions projectives des points non nuls de S en rayons.
    Agrégation gloutonne dans l'ordre des indices; invariante par homothétie positive.

    Args:
        S: Nuage non vide
        angular_tol: Écart angulaire maximal (radians) à la direction moyenne d'un rayon
        zero_tol: Norme en deçà de laquelle un point est compté comme nul

    Returns:
        ConeReport (liste de rayons vide et zero_flag si S est entièrement nul)
    """
    if S.is_empty():
        raise DomainError("Cône d'un ensemble vide")
    norms = np.linalg.norm(S.points, axis=1)
    nonzero = norms > zero_tol
    units = S.points[nonzero] / norms[nonzero][:, None]
    zero_count = int(np.sum(~nonzero))

    sums: List[np.ndarray] = []
    counts: List[int] = []
    for u in units:
        best, best_angle = -1, math.inf
        for idx, total in enumerate(sums):
            direction = total / np.linalg.norm(total)
            angle = math.acos(min(1.0, max(-1.0, float(direction @ u))))
            if angle < best_angle:
                best, best_angle = idx, angle
        if best >= 0 and best_angle <= angular_tol:
            sums[best] = sums[best] + u
            counts[best] += 1
        else:
            sums.append(u.copy())
            counts.append(1)

    if sums:
        rays = np.vstack([s / np.linalg.norm(s) for s in sums])
    else:
        rays = np.zeros((0, S.rank))
    if zero_count == len(S):
        logger.debug("Nuage entièrement nul: cône dégénéré")
    return ConeReport(rays=rays, counts=tuple(counts), zero_count=zero_count,
                      angular_tol=float(angular_tol))


def angular_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Angle entre deux directions non nulles"""
    cos = float(u @ v) / (float(np.linalg.norm(u)) * float(np.linalg.norm(v)))
    return math.acos(min(1.0, max(-1.0, cos)))
