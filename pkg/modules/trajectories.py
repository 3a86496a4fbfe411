"""
Sources de courbes paramétrées sur le tore
Flots linéaires, flots intégrés, constructions pathologiques, reparamétrages et perturbations bornées
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from config import get_config
from modules.errors import ConstructionError, DomainError, IntegrationError, StructuralError
from modules.torus_geometry import TorusGeometry, TrigPolynomial

logger = logging.getLogger(__name__)

FULL_LINE = (-math.inf, math.inf)


@dataclass(frozen=True, eq=False)
class LiftedCurve:
    """
    Courbe donnée par son relevé c̃: R -> R^n.
    L'évaluateur est vectorisé: tableau de temps (m,) -> positions (m, n).
    """
    kind: str
    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    velocity: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Tuple[float, float] = FULL_LINE
    speed_bound: Optional[float] = None
    smoothness: str = ''
    metadata: Dict[str, Any] = field(default_factory=dict)

    def _times(self, t) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(t, dtype=float)
        flat = np.atleast_1d(arr).reshape(-1)
        if flat.size and (flat.min() < self.domain[0] or flat.max() > self.domain[1]):
            raise DomainError(f"Temps hors du domaine {self.domain}: "
                              f"[{flat.min()}, {flat.max()}]")
        return flat, arr.ndim == 0

    def __call__(self, t) -> np.ndarray:
        flat, scalar = self._times(t)
        out = np.asarray(self.evaluator(flat), dtype=float).reshape(flat.size, self.dim)
        return out[0] if scalar else out

    def velocity_at(self, t) -> np.ndarray:
        """Vitesse exacte si disponible, sinon différence centrée"""
        flat, scalar = self._times(t)
        if self.velocity is not None:
            out = np.asarray(self.velocity(flat), dtype=float).reshape(flat.size, self.dim)
        else:
            h = 1e-6 * np.maximum(1.0, np.abs(flat))
            lo = np.maximum(flat - h, self.domain[0])
            hi = np.minimum(flat + h, self.domain[1])
            out = (self.evaluator(hi) - self.evaluator(lo)) / (hi - lo)[:, None]
        return out[0] if scalar else out

    @property
    def is_bounded_domain(self) -> bool:
        return math.isfinite(self.domain[0]) and math.isfinite(self.domain[1])


def linear_flow_curve(v, x0=None) -> LiftedCurve:
    """
    c̃(t) = x0 + t·v

    Args:
        v: Direction non nulle
        x0: Point initial (origine par défaut)

    Returns:
        LiftedCurve analytique
    """
    v = np.array(v, dtype=float).reshape(-1)
    if not np.any(v):
        raise DomainError("Direction nulle pour un flot linéaire")
    x0 = np.zeros_like(v) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    if x0.size != v.size:
        raise StructuralError(f"x0 de dimension {x0.size}, attendu {v.size}")
    v.setflags(write=False)
    x0.setflags(write=False)
    return LiftedCurve(
        kind='analytic',
        dim=v.size,
        evaluator=lambda t: x0[None, :] + t[:, None] * v[None, :],
        velocity=lambda t: np.broadcast_to(v, (t.size, v.size)),
        speed_bound=float(np.linalg.norm(v)),
        smoothness='analytique',
        metadata={'linear_velocity': v, 'x0': x0},
    )


def loop_curve(geom: TorusGeometry, klass, arclength: bool = True, x0=None) -> LiftedCurve:
    """Lacet fermé de classe a parcouru périodiquement (période = longueur plate si arclength)"""
    a = np.array(klass, dtype=float)
    if not np.array_equal(a, np.round(a)) or not np.any(a):
        raise DomainError(f"Classe de lacet invalide: {klass}")
    length = float(geom.flat_norm(a))
    period = length if arclength else 1.0
    curve = linear_flow_curve(a / period, x0)
    curve.metadata.update({'period': period, 'class': a, 'loop_length': length})
    return curve


def constant_curve(x0) -> LiftedCurve:
    """Courbe immobile (lacet constant, cône dégénéré)"""
    x0 = np.array(x0, dtype=float).reshape(-1)
    x0.setflags(write=False)
    return LiftedCurve(
        kind='analytic',
        dim=x0.size,
        evaluator=lambda t: np.broadcast_to(x0, (t.size, x0.size)).copy(),
        velocity=lambda t: np.zeros((t.size, x0.size)),
        speed_bound=0.0,
        smoothness='constante',
        metadata={'x0': x0},
    )


def piecewise_linear_curve(times, points, metadata: Optional[Dict[str, Any]] = None) -> LiftedCurve:
    """
    Relevé affine par morceaux par les nœuds (t_k, X_k), prolongé linéairement
    au-delà des extrémités par le premier et le dernier segment.
    """
    tk = np.array(times, dtype=float)
    X = np.array(points, dtype=float)
    if tk.ndim != 1 or tk.size < 2 or X.shape[0] != tk.size:
        raise DomainError("Au moins deux nœuds requis")
    if np.any(np.diff(tk) <= 0):
        raise DomainError("Temps des nœuds non strictement croissants")
    V = np.diff(X, axis=0) / np.diff(tk)[:, None]
    for arr in (tk, X, V):
        arr.setflags(write=False)
    last = tk.size - 2

    def segment(t: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(tk, t, side='right') - 1, 0, last)

    def evaluate(t: np.ndarray) -> np.ndarray:
        idx = segment(t)
        return X[idx] + (t - tk[idx])[:, None] * V[idx]

    meta = {'nodes_t': tk, 'nodes_x': X}
    meta.update(metadata or {})
    return LiftedCurve(
        kind='piecewise',
        dim=X.shape[1],
        evaluator=evaluate,
        velocity=lambda t: V[segment(t)],
        speed_bound=float(np.max(np.linalg.norm(V, axis=1))),
        smoothness='lipschitzienne',
        metadata=meta,
    )


@dataclass(frozen=True, eq=False)
class VectorField:
    """Champ de vecteurs périodique à composantes trigonométriques"""
    components: Tuple[TrigPolynomial, ...]

    def __post_init__(self):
        dims = {c.dim for c in self.components}
        if len(dims) != 1 or dims.pop() != len(self.components):
            raise StructuralError("Le champ doit avoir n composantes sur le tore de dimension n")

    @classmethod
    def from_descriptor(cls, dim: int, descriptor: Dict[str, Any]) -> 'VectorField':
        """
        {"components": [[termes], ...]} ou
        {"profile": [termes], "direction": [...]} pour profil(x)·direction/|direction|
        """
        if 'components' in descriptor:
            return cls(tuple(TrigPolynomial.from_terms(dim, terms)
                             for terms in descriptor['components']))
        direction = np.array(descriptor['direction'], dtype=float)
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            raise DomainError("Direction nulle pour le champ")
        profile = TrigPolynomial.from_terms(dim, descriptor['profile'])
        return cls(tuple(
            TrigPolynomial(profile.frequencies, profile.cos_amps * d / norm, profile.sin_amps * d / norm)
            for d in direction
        ))

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([c.value(x) for c in self.components], axis=-1)

    def bound(self) -> float:
        return float(np.linalg.norm([c.bound() for c in self.components]))


def integrate_flow(vector_field: VectorField, x0, T: float, tol: float,
                   method: str = 'DOP853') -> LiftedCurve:
    """
    Intègre le relevé du flot sur [-T, T] (Runge-Kutta adaptatif) avec sortie dense
    par interpolation de Hermite cubique entre pas acceptés.

    Args:
        vector_field: Champ périodique
        x0: Condition initiale
        T: Horizon
        tol: Tolérance locale (rtol = atol = tol)
        method: Méthode de solve_ivp

    Returns:
        LiftedCurve de type 'ode' sur [-T, T]
    """
    if tol <= 0 or T <= 0:
        raise DomainError(f"Paramètres d'intégration invalides: T={T}, tol={tol}")
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.size != vector_field.dim:
        raise StructuralError(f"x0 de dimension {x0.size}, attendu {vector_field.dim}")

    def rhs(_, y):
        return vector_field(y)

    runs = []
    for horizon in (T, -T):
        sol = solve_ivp(rhs, (0.0, horizon), x0, method=method, rtol=tol, atol=tol)
        if sol.status < 0:
            logger.error(f"Intégration interrompue vers {horizon}: {sol.message}")
            raise IntegrationError(f"Échec de l'intégration: {sol.message}",
                                   times=sol.t, states=sol.y.T)
        runs.append((sol.t, sol.y.T))
    (tf, yf), (tb, yb) = runs
    times = np.concatenate([tb[::-1][:-1], tf])
    states = np.concatenate([yb[::-1][:-1], yf])
    derivatives = vector_field(states)
    spline = CubicHermiteSpline(times, states, derivatives, axis=0)
    velocity = spline.derivative()
    logger.info(f"Flot intégré sur [-{T}, {T}] en {times.size - 1} pas (tol={tol})")
    return LiftedCurve(
        kind='ode',
        dim=x0.size,
        evaluator=lambda t: spline(t),
        velocity=lambda t: velocity(t),
        domain=(float(times[0]), float(times[-1])),
        speed_bound=vector_field.bound(),
        smoothness='C^1 par morceaux (Hermite)',
        metadata={'steps': int(times.size - 1), 'tol': tol, 'method': method},
    )


def arc_length_reparametrize(curve: LiftedCurve, geom: TorusGeometry,
                             horizon: Optional[float] = None) -> LiftedCurve:
    """
    Reparamètre la courbe par l'abscisse curviligne (orientation conservée, σ(0) = 0).
    Exact pour les flots linéaires et les courbes affines par morceaux en métrique plate.

    Args:
        curve: Courbe rectifiable
        geom: Géométrie fournissant la métrique
        horizon: Demi-largeur de l'intervalle numérique si le domaine est infini

    Returns:
        LiftedCurve de vitesse unité
    """
    velocity = curve.metadata.get('linear_velocity')
    if velocity is not None and geom.is_flat:
        speed = float(geom.flat_norm(velocity))
        if speed == 0.0:
            raise DomainError("Vitesse nulle: reparamétrage impossible")
        return _rescaled_linear(curve, speed)
    if curve.kind == 'piecewise' and geom.is_flat and 'nodes_t' in curve.metadata:
        return _arc_length_piecewise(curve, geom)
    return _arc_length_numeric(curve, geom, horizon)


def _rescaled_linear(curve: LiftedCurve, speed: float) -> LiftedCurve:
    v = curve.metadata['linear_velocity'] / speed
    x0 = curve.metadata['x0']
    new = linear_flow_curve(v, x0)
    new.metadata.update({k: val for k, val in curve.metadata.items()
                         if k not in ('linear_velocity', 'x0', 'period')})
    new.metadata['dilation'] = speed
    if 'period' in curve.metadata:
        new.metadata['period'] = curve.metadata['period'] * speed
    return new


def _arc_length_piecewise(curve: LiftedCurve, geom: TorusGeometry) -> LiftedCurve:
    tk = curve.metadata['nodes_t']
    X = curve.metadata['nodes_x']
    lengths = geom.flat_norm(np.diff(X, axis=0))
    if np.any(lengths == 0.0):
        raise DomainError("Intervalle stationnaire: vitesse nulle sur un segment")
    sigma = np.concatenate([[0.0], np.cumsum(lengths)])
    origin = float(np.interp(0.0, tk, sigma)) if tk[0] <= 0.0 <= tk[-1] else 0.0
    meta = {k: v for k, v in curve.metadata.items() if k not in ('nodes_t', 'nodes_x')}
    return piecewise_linear_curve(sigma - origin, X, metadata=meta)


def _arc_length_numeric(curve: LiftedCurve, geom: TorusGeometry,
                        horizon: Optional[float]) -> LiftedCurve:
    if curve.is_bounded_domain:
        lo, hi = curve.domain
    elif horizon is not None:
        lo, hi = -float(horizon), float(horizon)
    else:
        raise DomainError("Horizon requis pour reparamétrer numériquement une courbe sur R")
    cfg = get_config()
    vmax = curve.speed_bound or 1.0
    count = max(2001, int(math.ceil(cfg.SAMPLES_PER_UNIT * vmax * (hi - lo))) + 1)
    times = np.linspace(lo, hi, count)
    positions = curve(times)
    speeds = geom.flat_norm(curve.velocity_at(times)) * geom.conformal_factor(positions)
    if np.min(speeds) <= 1e-12:
        raise DomainError("Intervalle stationnaire: vitesse nulle sur l'échantillon")
    sigma = cumulative_trapezoid(speeds, times, initial=0.0)
    anchor = min(max(0.0, lo), hi)
    sigma = sigma - float(np.interp(anchor, times, sigma))
    inverse = CubicHermiteSpline(sigma, times, 1.0 / speeds)
    base = curve

    def evaluate(s: np.ndarray) -> np.ndarray:
        return base.evaluator(np.clip(inverse(s), lo, hi))

    def unit_velocity(s: np.ndarray) -> np.ndarray:
        t = np.clip(inverse(s), lo, hi)
        v = base.velocity_at(t)
        norm = geom.flat_norm(v) * geom.conformal_factor(base.evaluator(t))
        return v / norm[:, None]

    return LiftedCurve(
        kind=curve.kind,
        dim=curve.dim,
        evaluator=evaluate,
        velocity=unit_velocity,
        domain=(float(sigma[0]), float(sigma[-1])),
        speed_bound=float(1.0 / max(geom.conformal_factor(positions).min(), 1e-300)
                          / np.min(np.sqrt(np.linalg.eigvalsh(geom.gram)))),
        smoothness=curve.smoothness,
        metadata=dict(curve.metadata, arclength=True),
    )


@dataclass(frozen=True)
class SpeedFunction:
    """Reparamétrage croissant ψ: constant (ψ(t) = λt) ou dilatation programmée affine par morceaux"""
    kind: str = 'constant'
    factor: float = 1.0
    knots: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == 'constant':
            if not self.factor > 0:
                raise DomainError(f"Vitesse constante non positive: {self.factor}")
        elif self.kind == 'schedule':
            if len(self.knots) < 2:
                raise DomainError("Au moins deux nœuds pour une dilatation programmée")
            t = np.array([k[0] for k in self.knots])
            psi = np.array([k[1] for k in self.knots])
            if np.any(np.diff(t) <= 0) or np.any(np.diff(psi) <= 0):
                raise DomainError("Dilatation programmée non strictement croissante")
        else:
            raise DomainError(f"Type de vitesse inconnu: {self.kind}")

    def __call__(self, t: np.ndarray) -> np.ndarray:
        if self.kind == 'constant':
            return self.factor * t
        return _extended_interp(t, [k[0] for k in self.knots], [k[1] for k in self.knots])

    def derivative(self, t: np.ndarray) -> np.ndarray:
        if self.kind == 'constant':
            return np.full_like(t, self.factor)
        tk = np.array([k[0] for k in self.knots])
        psi = np.array([k[1] for k in self.knots])
        slopes = np.diff(psi) / np.diff(tk)
        idx = np.clip(np.searchsorted(tk, t, side='right') - 1, 0, slopes.size - 1)
        return slopes[idx]

    def label(self) -> str:
        return f"x{self.factor:g}" if self.kind == 'constant' else f"programme{len(self.knots)}"


def _extended_interp(x, xp, fp) -> np.ndarray:
    xp = np.asarray(xp, dtype=float)
    fp = np.asarray(fp, dtype=float)
    slopes = np.diff(fp) / np.diff(xp)
    idx = np.clip(np.searchsorted(xp, x, side='right') - 1, 0, slopes.size - 1)
    return fp[idx] + (x - xp[idx]) * slopes[idx]


def reparametrize(curve: LiftedCurve, speed: SpeedFunction) -> LiftedCurve:
    """c∘ψ pour un reparamétrage croissant ψ"""
    if curve.is_bounded_domain and speed.kind != 'constant':
        raise DomainError("Dilatation programmée réservée aux courbes définies sur R")
    domain = curve.domain
    if speed.kind == 'constant':
        domain = (curve.domain[0] / speed.factor, curve.domain[1] / speed.factor)
    bound = None
    if curve.speed_bound is not None:
        rates = [speed.factor] if speed.kind == 'constant' else \
            np.diff([k[1] for k in speed.knots]) / np.diff([k[0] for k in speed.knots])
        bound = curve.speed_bound * float(np.max(rates))
    meta = dict(curve.metadata)
    meta.pop('linear_velocity', None)
    meta.pop('period', None)
    meta['speed'] = speed.label()
    return LiftedCurve(
        kind=curve.kind,
        dim=curve.dim,
        evaluator=lambda t: curve.evaluator(speed(t)),
        velocity=lambda t: curve.velocity_at(speed(t)) * speed.derivative(t)[:, None],
        domain=domain,
        speed_bound=bound,
        smoothness=curve.smoothness,
        metadata=meta,
    )


@dataclass(frozen=True)
class CounterexampleSpec:
    """
    Courbe qui oscille entre des cibles a_n, b_n du demi-plan inférieur ouvert
    de la droite y = slope·x, dont les milieux tendent vers 0.
    """
    slope: float = math.sqrt(2.0)
    depths: int = 10
    targets_a: Optional[Tuple[Tuple[float, float], ...]] = None
    targets_b: Optional[Tuple[Tuple[float, float], ...]] = None
    first_time: float = 1.0
    ray_ratio: float = 10.0
    travel_ratio: float = 3.0
    pause_ratio: float = 100.0
    drift: float = 1e-3
    speed_cap: float = 50.0

    def targets(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.targets_a is not None and self.targets_b is not None:
            a = np.array(self.targets_a, dtype=float)
            b = np.array(self.targets_b, dtype=float)
            if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2:
                raise DomainError("Cibles a_n, b_n de formes incompatibles")
            return a, b
        n = np.arange(1, self.depths + 1, dtype=float)
        a = np.column_stack([-n, -n * self.slope - 1.0 / n])
        b = np.column_stack([n, n * self.slope - 1.0 / n])
        return a, b

    def height(self, x: np.ndarray) -> np.ndarray:
        """h(x) = slope·x1 - x2, strictement positive sous la droite"""
        x = np.asarray(x, dtype=float)
        return self.slope * x[..., 0] - x[..., 1]

    def drift_direction(self) -> np.ndarray:
        return np.array([self.slope, -1.0]) / math.hypot(self.slope, 1.0)


@dataclass(frozen=True)
class CounterexampleSchedule:
    """Temps de début et de fin des rayons (côté positif) et temps de pause final"""
    ray_starts: Tuple[float, ...]
    ray_ends: Tuple[float, ...]
    pause_time: float

    def to_dict(self) -> Dict[str, Any]:
        return {'ray_starts': list(self.ray_starts), 'ray_ends': list(self.ray_ends),
                'pause_time': self.pause_time}


def counterexample_schedule(spec: CounterexampleSpec) -> CounterexampleSchedule:
    """Calendrier des époques: rayon [T_j, ρT_j], trajet jusqu'à κρT_j, pause jusqu'à π·ρT_last"""
    a, _ = spec.targets()
    if spec.first_time <= 0 or spec.ray_ratio <= 1 or spec.travel_ratio <= 1 or spec.pause_ratio <= 1:
        raise DomainError("Rapports du calendrier invalides")
    starts, ends = [], []
    t = spec.first_time
    for _ in range(a.shape[0]):
        starts.append(t)
        ends.append(spec.ray_ratio * t)
        t = spec.travel_ratio * ends[-1]
    return CounterexampleSchedule(tuple(starts), tuple(ends), spec.pause_ratio * ends[-1])


def counterexample_curve(spec: CounterexampleSpec) -> LiftedCurve:
    """
    Relevé affine par morceaux: c̃(t) = t·b_n sur les rayons positifs, c̃(s) = s·a_n
    sur les rayons négatifs, trajets droits entre rayons, puis dérive lente ε·ν.

    Returns:
        LiftedCurve de type 'piecewise'
    """
    a, b = spec.targets()
    if np.any(spec.height(a) <= 0) or np.any(spec.height(b) <= 0):
        bad = int(np.nonzero((spec.height(a) <= 0) | (spec.height(b) <= 0))[0][0])
        raise ConstructionError(f"Cible hors du demi-plan inférieur à l'époque {bad}", epoch=bad)
    mids = np.linalg.norm((a + b) / 2.0, axis=1)
    if np.any(np.diff(mids) >= 0):
        bad = int(np.nonzero(np.diff(mids) >= 0)[0][0]) + 1
        raise ConstructionError(f"Milieux non décroissants en norme à l'époque {bad}", epoch=bad)

    schedule = counterexample_schedule(spec)
    nu = spec.drift_direction()
    R, P = schedule.ray_ends[-1], schedule.pause_time

    pos_t, pos_x, pos_epoch = [0.0], [np.zeros(2)], []
    neg_t, neg_x, neg_epoch = [], [], []
    for j, (T, Rj) in enumerate(zip(schedule.ray_starts, schedule.ray_ends)):
        pos_t += [T, Rj]
        pos_x += [T * b[j], Rj * b[j]]
        pos_epoch += [j, j]
        neg_t += [-T, -Rj]
        neg_x += [-T * a[j], -Rj * a[j]]
        neg_epoch += [j, j]
    pos_t.append(P)
    pos_x.append(R * b[-1] + (P - R) * spec.drift * nu)
    pos_epoch.append(len(schedule.ray_ends))
    neg_t.append(-P)
    neg_x.append(-R * a[-1] + (-P + R) * spec.drift * nu)
    neg_epoch.append(len(schedule.ray_ends))

    times = np.array(neg_t[::-1] + pos_t)
    points = np.array(neg_x[::-1] + pos_x)
    # époque de chaque segment, dans l'ordre des temps
    epochs = neg_epoch[::-1] + pos_epoch
    deltas = np.diff(points, axis=0)
    durations = np.diff(times)
    rises = spec.height(deltas)
    speeds = np.linalg.norm(deltas, axis=1) / durations
    for k in range(deltas.shape[0]):
        if not rises[k] > 0:
            raise ConstructionError(
                f"Relevé non strictement monotone pour h à l'époque {epochs[k]}", epoch=epochs[k])
        if speeds[k] > spec.speed_cap:
            raise ConstructionError(
                f"Vitesse {speeds[k]:.3g} au-delà du plafond {spec.speed_cap} à l'époque {epochs[k]}",
                epoch=epochs[k])
    logger.info(f"Contre-exemple construit: {a.shape[0]} profondeurs, pause à t={P:.3g}")
    return piecewise_linear_curve(times, points, metadata={
        'schedule': schedule, 'spec': spec, 'targets_a': a, 'targets_b': b})


@dataclass(frozen=True)
class OscillatorSpec:
    """Excursions aller-retour de longueurs L0·r^j alternant entre les demi-axes +x et +y"""
    first_length: float = 4.0
    ratio: float = 4.0
    corridor: float = 0.1
    first_axis: int = 0

    def __post_init__(self):
        if self.first_length <= 0 or self.ratio <= 1 or not 0 < self.corridor < 1:
            raise DomainError("Spécification d'oscillateur invalide")

    def epochs(self, count: int) -> List[Dict[str, float]]:
        """Temps de début, axe visé et longueur de chaque excursion"""
        return [{
            'start': self.start_time(j),
            'axis': (self.first_axis + j) % 2,
            'length': self.first_length * self.ratio ** j,
        } for j in range(count)]

    def start_time(self, j):
        return 2.0 * self.first_length * (self.ratio ** j - 1.0) / (self.ratio - 1.0)


def axes_oscillator_curve(spec: OscillatorSpec) -> LiftedCurve:
    """
    Pour t >= 0, excursions alternées le long des axes à vitesse unité;
    pour t < 0, petit cercle (ε/2)(1 - cos t, sin t) borné.
    """
    L0, r, eps, axis0 = spec.first_length, spec.ratio, spec.corridor, spec.first_axis

    def locate(t: np.ndarray):
        j = np.floor(np.log1p(t * (r - 1.0) / (2.0 * L0)) / math.log(r))
        j = j + (spec.start_time(j + 1) <= t) - (spec.start_time(j) > t)
        tau = t - spec.start_time(j)
        length = L0 * r ** j
        return j.astype(np.int64), tau, length

    def evaluate(t: np.ndarray) -> np.ndarray:
        out = np.zeros((t.size, 2))
        neg = t < 0
        out[neg, 0] = 0.5 * eps * (1.0 - np.cos(t[neg]))
        out[neg, 1] = 0.5 * eps * np.sin(t[neg])
        pos = ~neg
        if np.any(pos):
            j, tau, length = locate(t[pos])
            d = np.where(tau <= length, tau, 2.0 * length - tau)
            axis = (axis0 + j) % 2
            rows = np.nonzero(pos)[0]
            out[rows, axis] = d
        return out

    def velocity(t: np.ndarray) -> np.ndarray:
        out = np.zeros((t.size, 2))
        neg = t < 0
        out[neg, 0] = 0.5 * eps * np.sin(t[neg])
        out[neg, 1] = 0.5 * eps * np.cos(t[neg])
        pos = ~neg
        if np.any(pos):
            j, tau, length = locate(t[pos])
            axis = (axis0 + j) % 2
            rows = np.nonzero(pos)[0]
            out[rows, axis] = np.where(tau <= length, 1.0, -1.0)
        return out

    return LiftedCurve(
        kind='piecewise',
        dim=2,
        evaluator=evaluate,
        velocity=velocity,
        speed_bound=max(1.0, 0.5 * eps),
        smoothness='lipschitzienne',
        metadata={'oscillator': spec},
    )


@dataclass(frozen=True, eq=False)
class BoundedDisplacement:
    """δ(t) = Σ A_j sin(ω_j t + φ_j), de norme majorée par Σ |A_j|"""
    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.amplitudes, dtype=float))
        w = np.array(self.frequencies, dtype=float).reshape(-1)
        phi = np.array(self.phases, dtype=float).reshape(-1)
        if A.shape[0] != w.size or phi.size != w.size:
            raise StructuralError("Amplitudes, fréquences et phases de tailles différentes")
        for name, arr in (('amplitudes', A), ('frequencies', w), ('phases', phi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_terms(cls, dim: int, terms: Sequence[Dict[str, Any]]) -> 'BoundedDisplacement':
        if not terms:
            return cls(np.zeros((0, dim)), np.zeros(0), np.zeros(0))
        return cls(np.array([t['amp'] for t in terms], dtype=float),
                   np.array([t.get('omega', 1.0) for t in terms], dtype=float),
                   np.array([t.get('phase', 0.0) for t in terms], dtype=float))

    @property
    def bound(self) -> float:
        return float(np.sum(np.linalg.norm(self.amplitudes, axis=1))) if self.frequencies.size else 0.0

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return np.sin(np.outer(t, self.frequencies) + self.phases) @ self.amplitudes

    def derivative(self, t: np.ndarray) -> np.ndarray:
        return (np.cos(np.outer(t, self.frequencies) + self.phases) * self.frequencies) @ self.amplitudes


def perturb_bounded(curve: LiftedCurve, displacement: BoundedDisplacement, bound: float) -> LiftedCurve:
    """
    c1(t) = c0(t) + δ(t) avec |δ(t)| <= D pour tout t.

    Args:
        curve: Courbe c0
        displacement: Déplacement borné périodique en temps
        bound: Borne D

    Returns:
        LiftedCurve perturbée (la courbe d'origine si D = 0)
    """
    if bound < 0:
        raise DomainError(f"Borne négative: {bound}")
    if displacement.frequencies.size and displacement.amplitudes.shape[1] != curve.dim:
        raise StructuralError("Déplacement de dimension incompatible")
    if displacement.bound > bound + 1e-12:
        raise DomainError(f"Déplacement de borne {displacement.bound:.3g} au-delà de D={bound}")
    if bound == 0.0 or displacement.bound == 0.0:
        return curve
    meta = dict(curve.metadata)
    meta.pop('linear_velocity', None)
    meta.pop('nodes_t', None)
    meta.pop('nodes_x', None)
    meta['perturbation_bound'] = bound
    extra = float(np.sum(np.linalg.norm(displacement.amplitudes, axis=1) * np.abs(displacement.frequencies)))
    return LiftedCurve(
        kind=curve.kind,
        dim=curve.dim,
        evaluator=lambda t: curve.evaluator(t) + displacement(t),
        velocity=lambda t: curve.velocity_at(t) + displacement.derivative(t),
        domain=curve.domain,
        speed_bound=None if curve.speed_bound is None else curve.speed_bound + extra,
        smoothness=curve.smoothness,
        metadata=meta,
    )
