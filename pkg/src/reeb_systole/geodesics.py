"""Geodesic flow and closed-geodesic search.

States live on the unit sphere: a point ``p`` and an ambient tangent vector
``v`` of unit speed for the metric. Conformal metrics are integrated in these
coordinates; ellipsoids are integrated on the embedded surface ``A p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize
from scipy.special import ellipe
from scipy.stats import qmc

from . import _backend
from . import _tableau as tb
from .metrics import (ConformalMetric, EllipsoidMetric, MetricModel,
                      RoundMetric, balance)


class StiffnessError(RuntimeError):
    """Raised when the adaptive step size collapses."""


class SystoleSearchError(RuntimeError):
    """Raised when no closed geodesic is found within the budget."""


DEFAULT_TOL = 1e-12
CLOSURE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        p = p / np.linalg.norm(p)
        v = np.asarray(self.velocity, dtype=float)
        v = v - (v @ p) * p
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)

    @classmethod
    def unit(cls, metric: MetricModel, p, direction) -> "GeodesicState":
        """State at ``p`` heading along ``direction`` with unit metric speed."""
        s = cls(p, direction)
        sp = math.sqrt(metric.speed2(s.position[None], s.velocity[None])[0])
        if sp == 0:
            raise ValueError("direction must be tangent and nonzero")
        return cls(s.position, s.velocity / sp)

    def reversed(self) -> "GeodesicState":
        return GeodesicState(self.position, -self.velocity)

    def to_dict(self) -> dict:
        return {"position": self.position.tolist(), "velocity": self.velocity.tolist()}


def _as_flowable(metric: MetricModel) -> MetricModel:
    return metric.as_conformal() if isinstance(metric, RoundMetric) else metric


def _kernel_args(metric: MetricModel):
    if isinstance(metric, ConformalMetric):
        return tb.KIND_CONFORMAL, np.ascontiguousarray(metric.phi.coeffs), metric.band_limit
    if isinstance(metric, EllipsoidMetric):
        return tb.KIND_ELLIPSOID, metric.axes, 0
    raise TypeError(f"no geodesic equation for {type(metric).__name__}")


def _to_ode(metric, state: GeodesicState) -> np.ndarray:
    if isinstance(metric, EllipsoidMetric):
        return np.concatenate([state.position * metric.axes, state.velocity * metric.axes])
    return np.concatenate([state.position, state.velocity])


def _from_ode(metric, y) -> GeodesicState:
    y = np.asarray(y)
    if isinstance(metric, EllipsoidMetric):
        return GeodesicState(y[:3] / metric.axes, y[3:] / metric.axes)
    return GeodesicState(y[:3], y[3:])


def _run(metric, y0, t_end, tol, record=False, max_steps=10_000_000, h0=0.0):
    kind, params, L = _kernel_args(metric)
    try:
        return _backend.integrate(kind, params, L, y0, t_end, tol, tol, h0, max_steps, record)
    except RuntimeError as exc:
        if "underflow" in str(exc):
            raise StiffnessError(str(exc)) from exc
        raise


def _constraint_drift(metric, y):
    """(|speed - 1|, distance off the surface) of ODE states ``y``."""
    y = np.atleast_2d(y)
    if isinstance(metric, EllipsoidMetric):
        speed = np.linalg.norm(y[:, 3:], axis=1)
        off = np.abs(np.sum((y[:, :3] / metric.axes) ** 2, axis=1) - 1.0)
    else:
        p = y[:, :3]
        r = np.linalg.norm(p, axis=1)
        speed = np.sqrt(metric.speed2(p / r[:, None], y[:, 3:]))
        off = np.abs(r - 1.0)
    return np.abs(speed - 1.0), off


@dataclass(frozen=True, eq=False)
class Trajectory:
    final: GeodesicState
    time: float
    steps: int
    speed_drift: float
    surface_drift: float
    times: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    states: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((0, 6)))


def flow(metric: MetricModel, s0: GeodesicState, time: float, tol: float = DEFAULT_TOL,
         record: bool = False) -> Trajectory:
    """Integrate the geodesic flow for ``time`` (negative runs backwards).

    ``states`` (when recorded) are in the integrator's coordinates: the sphere
    for conformal metrics, the embedded surface for ellipsoids.
    """
    metric = _as_flowable(metric)
    if time < 0:
        tr = flow(metric, s0.reversed(), -time, tol, record)
        return Trajectory(tr.final.reversed(), time, tr.steps, tr.speed_drift,
                          tr.surface_drift, -tr.times, tr.states)
    y0 = _to_ode(metric, s0)
    _, y, steps, ts, ys = _run(metric, y0, time, tol, record)
    sd, off = _constraint_drift(metric, ys if record else y)
    return Trajectory(_from_ode(metric, y), time, int(steps), float(sd.max()),
                      float(off.max()), np.asarray(ts), np.asarray(ys))


def phase_distance(metric: MetricModel, a: GeodesicState, b: GeodesicState) -> float:
    """Euclidean distance of two unit states in the integrator's coordinates."""
    metric = _as_flowable(metric)
    return float(np.linalg.norm(_to_ode(metric, a) - _to_ode(metric, b)))


def clairaut_invariant(metric: MetricModel, states: np.ndarray) -> np.ndarray:
    """Angular momentum about the symmetry axis for ODE-coordinate states.

    Equals ``r sin(psi)`` for unit-speed geodesics on a surface of revolution,
    ``r`` the distance to the axis and ``psi`` the angle with the meridian.
    """
    metric = _as_flowable(metric)
    y = np.atleast_2d(states)
    if isinstance(metric, EllipsoidMetric):
        ax = metric.axes
        if math.isclose(ax[0], ax[1]):
            k = 2
        elif math.isclose(ax[1], ax[2]):
            k = 0
        else:
            raise ValueError("ellipsoid is not a surface of revolution")
        return np.cross(y[:, :3], y[:, 3:])[:, k]
    if np.any(np.abs(metric.phi.coeffs[_nonzonal(metric.band_limit)]) > 0):
        raise ValueError("conformal factor is not zonal")
    p = y[:, :3] / np.linalg.norm(y[:, :3], axis=1)[:, None]
    return np.exp(2.0 * metric.phi(p)) * np.cross(p, y[:, 3:])[:, 2]


def _nonzonal(L):
    from .sphere import orders
    return orders(L) != 0


# --- closed geodesics ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClosedGeodesic:
    initial_state: GeodesicState
    length: float
    closure_residual: float
    source: str = "shooting_search"

    def to_dict(self) -> dict:
        return {"length": self.length, "residual": self.closure_residual,
                "source": self.source, "initial_state": self.initial_state.to_dict()}


@dataclass(frozen=True, eq=False)
class SystoleEstimate:
    value: float
    source: str
    candidates: list
    kind: str = "upper_bound"
    search_found: bool = True

    def to_dict(self) -> dict:
        cands = sorted(self.candidates, key=lambda c: c.length)
        return {"value": self.value, "kind": self.kind, "source": self.source,
                "search_found": self.search_found,
                "candidates": [{"length": c.length, "residual": c.closure_residual,
                                "source": c.source} for c in cands]}


def closure_residual(metric: MetricModel, state: GeodesicState, period: float,
                     tol: float = DEFAULT_TOL) -> float:
    metric = _as_flowable(metric)
    y0 = _to_ode(metric, state)
    _, y, _, _, _ = _run(metric, y0, period, tol)
    return float(np.linalg.norm(y - y0))


def recheck(metric: MetricModel, cg: ClosedGeodesic, tol: float = DEFAULT_TOL) -> float:
    """Closure residual with the step size roughly halved (error scale / 2^8)."""
    return closure_residual(metric, cg.initial_state, cg.length, tol / 256.0)


def ellipse_perimeter(p: float, q: float) -> float:
    """Perimeter of the ellipse with semi-axes ``p`` and ``q`` by adaptive quadrature."""
    val, _ = sp_integrate.quad(lambda t: math.hypot(p * math.sin(t), q * math.cos(t)),
                               0.0, 0.5 * math.pi, epsabs=0.0, epsrel=1e-13, limit=200)
    return 4.0 * val


def ellipse_perimeter_elliptic(p: float, q: float) -> float:
    """Same perimeter through the complete elliptic integral of the second kind."""
    lo, hi = sorted((p, q))
    return 4.0 * hi * ellipe(1.0 - (lo / hi) ** 2)


def principal_section_lengths(metric: EllipsoidMetric) -> tuple[float, float, float]:
    """Perimeters of the coordinate-plane sections (a,b), (a,c), (b,c)."""
    if not isinstance(metric, EllipsoidMetric):
        raise TypeError("principal sections are defined for ellipsoids only")
    a, b, c = metric.a, metric.b, metric.c
    return ellipse_perimeter(a, b), ellipse_perimeter(a, c), ellipse_perimeter(b, c)


def _principal_candidates(metric: EllipsoidMetric, tol):
    lengths = principal_section_lengths(metric)
    # (start point, direction) on the unit sphere for each plane
    setups = [((1, 0, 0), (0, 1, 0)), ((1, 0, 0), (0, 0, 1)), ((0, 1, 0), (0, 0, 1))]
    out = []
    for L, (p, d) in zip(lengths, setups):
        s = GeodesicState.unit(metric, p, d)
        out.append(ClosedGeodesic(s, L, closure_residual(metric, s, L, tol), "principal_section"))
    return out


def _chart(p0):
    e = np.eye(3)[np.argmin(np.abs(p0))]
    e1 = e - (e @ p0) * p0
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(p0, e1)


def _state_from_params(metric, p0, e1, e2, x):
    s, t, psi = x[:3]
    p = p0 + s * e1 + t * e2
    p /= np.linalg.norm(p)
    f1 = e1 - (e1 @ p) * p
    f1 /= np.linalg.norm(f1)
    f2 = np.cross(p, f1)
    return GeodesicState.unit(metric, p, math.cos(psi) * f1 + math.sin(psi) * f2)


def polish_closed(metric: MetricModel, state: GeodesicState, period: float,
                  tol: float = DEFAULT_TOL) -> ClosedGeodesic | None:
    """Minimize the closure defect over (start point, direction, period)."""
    metric = _as_flowable(metric)
    p0 = state.position
    e1, e2 = _chart(p0)
    v = state.velocity
    psi0 = math.atan2(v @ e2, v @ e1)

    def resid(x):
        s = _state_from_params(metric, p0, e1, e2, x)
        y0 = _to_ode(metric, s)
        _, y, _, _, _ = _run(metric, y0, x[3], tol)
        return y - y0

    x0 = np.array([0.0, 0.0, psi0, period])
    try:
        res = optimize.least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15,
                                     gtol=1e-15, diff_step=1e-8, max_nfev=400)
    except (StiffnessError, RuntimeError, ValueError):
        return None
    if not np.all(np.isfinite(res.x)) or res.x[3] <= 0:
        return None
    s = _state_from_params(metric, p0, e1, e2, res.x)
    return ClosedGeodesic(s, float(res.x[3]), closure_residual(metric, s, res.x[3], tol))


def _screen(metric, state, t_max, n_chunks, tol):
    """Sampled phase-space distance to the start along one orbit."""
    y0 = _to_ode(metric, state)
    y = y0.copy()
    dt = t_max / n_chunks
    d = np.empty(n_chunks)
    h = 0.0
    for i in range(n_chunks):
        _, y, _, _, _ = _run(metric, y, dt, tol, h0=h)
        h = dt
        d[i] = np.linalg.norm(y - y0)
    return dt * np.arange(1, n_chunks + 1), d


def _local_minima(ts, d):
    """Parabolically refined minima of ``d`` after its first local maximum."""
    out = []
    seen_max = False
    for i in range(1, len(d) - 1):
        if d[i] >= d[i - 1] and d[i] >= d[i + 1]:
            seen_max = True
        elif seen_max and d[i] <= d[i - 1] and d[i] <= d[i + 1]:
            den = d[i - 1] - 2 * d[i] + d[i + 1]
            off = 0.5 * (d[i - 1] - d[i + 1]) / den if den > 0 else 0.0
            out.append((ts[i] + off * (ts[1] - ts[0]), d[i]))
    return out


def find_systole_upper(metric: MetricModel, starts: int = 512, seed: int = 0,
                       tol: float = CLOSURE_TOL, n_polish: int = 24,
                       screen_tol: float = 1e-9) -> SystoleEstimate:
    """Shortest closed geodesic found by multistart shooting; an upper bound.

    Starts are a scrambled Sobol sample of (point, direction). Each orbit is
    followed over (0, 3 * 2 pi R] and near-returns are polished by least
    squares; candidates closing to ``tol`` are kept. Ellipsoids add their
    principal sections.
    """
    flowable = _as_flowable(metric)
    R = balance(metric).circumradius
    t_max = 3.0 * 2.0 * math.pi * R
    cands: list[ClosedGeodesic] = []
    if isinstance(flowable, EllipsoidMetric):
        cands += [c for c in _principal_candidates(flowable, DEFAULT_TOL)
                  if c.closure_residual < tol]

    # a power-of-two draw keeps the balance properties; its prefix is the same sample
    m2 = max(0, math.ceil(math.log2(max(starts, 1))))
    sob = qmc.Sobol(3, scramble=True, seed=seed).random_base2(m2)[:starts]
    z = 2.0 * sob[:, 0] - 1.0
    lon = 2.0 * math.pi * sob[:, 1]
    psi = math.pi * sob[:, 2]
    r = np.sqrt(1.0 - z * z)
    pts = np.column_stack([r * np.cos(lon), r * np.sin(lon), z])

    near = []
    for p, ps in zip(pts, psi):
        e1, e2 = _chart(p)
        s = GeodesicState.unit(flowable, p, math.cos(ps) * e1 + math.sin(ps) * e2)
        try:
            ts, d = _screen(flowable, s, t_max, 384, screen_tol)
        except StiffnessError:
            continue
        for T, dd in _local_minima(ts, d):
            near.append((dd, T, s))

    # short near-returns first, then the tightest ones
    near.sort(key=lambda c: c[0])
    pool = near[: 4 * n_polish]
    pool.sort(key=lambda c: c[1])
    picked = pool[:n_polish] + near[:n_polish // 2]
    found = False
    seen = set()
    for dd, T, s in picked:
        key = (id(s), round(T, 6))
        if key in seen:
            continue
        seen.add(key)
        cg = polish_closed(flowable, s, T)
        if cg is not None and cg.closure_residual < tol and cg.length > 1e-6:
            cands.append(cg)
            found = True

    if not cands:
        raise SystoleSearchError(f"no closed geodesic closing to {tol:g} within {starts} starts")
    best = min(cands, key=lambda c: c.length)
    return SystoleEstimate(best.length, best.source, cands, search_found=found)


__all__ = ["StiffnessError", "SystoleSearchError", "GeodesicState", "Trajectory",
           "ClosedGeodesic", "SystoleEstimate", "flow", "phase_distance",
           "clairaut_invariant", "closure_residual", "recheck", "ellipse_perimeter",
           "ellipse_perimeter_elliptic", "principal_section_lengths", "polish_closed",
           "find_systole_upper"]
