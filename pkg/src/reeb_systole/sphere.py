"""Grids, quadrature and real spherical harmonics on the unit sphere.

Harmonics are real and orthonormal in L^2(dA), indexed ``k = l*l + l + m``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import optimize

from . import _backend

FOUR_PI = 4.0 * math.pi
GREEN_CONSTANT = (2.0 * math.log(2.0) - 1.0) / FOUR_PI


class ResolutionError(ValueError):
    """Grid or band limit too coarse for the requested operation."""


class SingularityError(ValueError):
    """Evaluation at a singular point (e.g. the Green's function diagonal)."""


def index(l: int, m: int) -> int:
    return l * l + l + m


def n_coeffs(L: int) -> int:
    return (L + 1) * (L + 1)


def degrees(L: int) -> np.ndarray:
    """Degree l of every coefficient slot up to band limit L."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(L + 1)])


def orders(L: int) -> np.ndarray:
    return np.concatenate([np.arange(-l, l + 1) for l in range(L + 1)])


@dataclass(frozen=True)
class SpherePoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        r = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if r == 0.0:
            raise ValueError("cannot place the origin on the sphere")
        object.__setattr__(self, "x", self.x / r)
        object.__setattr__(self, "y", self.y / r)
        object.__setattr__(self, "z", self.z / r)

    @classmethod
    def from_array(cls, a) -> "SpherePoint":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "SpherePoint":
        s = math.sin(theta)
        return cls(s * math.cos(phi), s * math.sin(phi), math.cos(theta))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def antipode(self) -> "SpherePoint":
        return SpherePoint(-self.x, -self.y, -self.z)


def as_points(p) -> np.ndarray:
    """Coerce SpherePoint / array-likes to an ``(N, 3)`` float array."""
    if isinstance(p, SpherePoint):
        return p.array[None, :]
    if isinstance(p, (list, tuple)) and p and isinstance(p[0], SpherePoint):
        return np.array([q.array for q in p])
    return np.atleast_2d(np.asarray(p, dtype=float))


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre nodes in cos(theta) times uniform longitudes.

    Products of harmonics up to total degree ``2*n_theta - 1`` in latitude and
    ``n_phi - 1`` in longitude are integrated exactly.
    """

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("grid needs at least one node per direction")

    @classmethod
    def for_band_limit(cls, L: int, oversample: int = 1) -> "SphereGrid":
        n = (2 * L + 2) * oversample
        return cls(n, 2 * n)

    @cached_property
    def _lat(self):
        return np.polynomial.legendre.leggauss(self.n_theta)

    @property
    def cos_theta(self) -> np.ndarray:
        return self._lat[0]

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self._lat[0])

    @property
    def phi(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi

    @cached_property
    def xyz(self) -> np.ndarray:
        z = self.cos_theta[:, None]
        s = np.sqrt(1.0 - z * z)
        ph = self.phi[None, :]
        pts = np.stack(np.broadcast_arrays(s * np.cos(ph), s * np.sin(ph), z), axis=-1)
        return pts.reshape(-1, 3)

    @cached_property
    def weights(self) -> np.ndarray:
        w = self._lat[1][:, None] * np.full(self.n_phi, 2.0 * math.pi / self.n_phi)[None, :]
        return w.ravel()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    @property
    def nodes(self) -> list[SpherePoint]:
        return [SpherePoint.from_array(p) for p in self.xyz]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values).ravel()))

    def max_band_limit(self) -> int:
        """Largest L accepted by :func:`analyze` on this grid."""
        return min(self.n_theta, self.n_phi) // 2 - 1

    @cached_property
    def _basis_cache(self) -> dict:
        return {}

    def basis(self, L: int) -> np.ndarray:
        """Harmonic basis sampled at the nodes, cached per band limit."""
        cache = self._basis_cache
        if L not in cache:
            B = _backend.basis(L, self.xyz)
            B.setflags(write=False)
            cache[L] = B
        return cache[L]


@dataclass(frozen=True, eq=False)
class HarmonicField:
    """Band-limited real spherical-harmonic expansion."""

    band_limit: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if self.band_limit < 0:
            raise ValueError("band limit must be nonnegative")
        if c.size != n_coeffs(self.band_limit):
            raise ValueError(
                f"expected {n_coeffs(self.band_limit)} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, L: int) -> "HarmonicField":
        return cls(L, np.zeros(n_coeffs(L)))

    @classmethod
    def basis_vector(cls, l: int, m: int, L: int | None = None,
                     scale: float = 1.0) -> "HarmonicField":
        L = l if L is None else L
        c = np.zeros(n_coeffs(L))
        c[index(l, m)] = scale
        return cls(L, c)

    @classmethod
    def from_terms(cls, terms, L: int | None = None) -> "HarmonicField":
        """Build from ``[(l, m, value), ...]``."""
        terms = list(terms)
        if L is None:
            L = max((int(t[0]) for t in terms), default=0)
        c = np.zeros(n_coeffs(L))
        for l, m, v in terms:
            l, m = int(l), int(m)
            if l > L or abs(m) > l:
                raise ValueError(f"invalid harmonic index ({l}, {m})")
            c[index(l, m)] += float(v)
        return cls(L, c)

    def __getitem__(self, lm: tuple[int, int]) -> float:
        l, m = lm
        if l > self.band_limit:
            return 0.0
        return float(self.coeffs[index(l, m)])

    def __add__(self, other: "HarmonicField") -> "HarmonicField":
        L = max(self.band_limit, other.band_limit)
        return HarmonicField(L, self.padded(L).coeffs + other.padded(L).coeffs)

    def __sub__(self, other: "HarmonicField") -> "HarmonicField":
        return self + (-1.0) * other

    def __mul__(self, s: float) -> "HarmonicField":
        return HarmonicField(self.band_limit, self.coeffs * float(s))

    __rmul__ = __mul__

    def padded(self, L: int) -> "HarmonicField":
        if L == self.band_limit:
            return self
        c = np.zeros(n_coeffs(L))
        n = min(n_coeffs(L), self.coeffs.size)
        c[:n] = self.coeffs[:n]
        return HarmonicField(L, c)

    @property
    def degrees(self) -> np.ndarray:
        return degrees(self.band_limit)

    @property
    def mean(self) -> float:
        """Average over the round sphere, a_00 / sqrt(4 pi)."""
        return self.coeffs[0] / math.sqrt(FOUR_PI)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs ** 2)))

    def grad_energy(self) -> float:
        """``int |grad f|^2 dA`` via Parseval."""
        l = self.degrees
        return float(np.sum(l * (l + 1) * self.coeffs ** 2))

    def zero_mean(self) -> "HarmonicField":
        c = self.coeffs.copy()
        c[0] = 0.0
        return HarmonicField(self.band_limit, c)

    def is_antipodal(self, tol: float = 0.0) -> bool:
        odd = self.degrees % 2 == 1
        return bool(np.all(np.abs(self.coeffs[odd]) <= tol))

    def __call__(self, pts) -> np.ndarray:
        return _backend.field_values(self.coeffs, self.band_limit, as_points(pts))

    def value_and_grad(self, pts):
        return _backend.field_values_grad(self.coeffs, self.band_limit, as_points(pts))

    def to_dict(self) -> dict:
        L = self.band_limit
        return {
            "band_limit": L,
            "coeffs": [[l, m, float(self.coeffs[index(l, m)])]
                       for l in range(L + 1) for m in range(-l, l + 1)
                       if self.coeffs[index(l, m)] != 0.0],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HarmonicField":
        return cls.from_terms(d.get("coeffs", []), int(d["band_limit"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "HarmonicField":
        return cls.from_dict(json.loads(s))


def analyze(values, grid: SphereGrid, L: int) -> HarmonicField:
    """L^2 projection of grid samples onto harmonics of degree <= L."""
    if grid.n_theta < 2 * L + 2 or grid.n_phi < 2 * L + 2:
        raise ResolutionError(
            f"grid {grid.shape} too coarse for band limit {L}; "
            f"need at least {2 * L + 2} nodes per direction")
    values = np.asarray(values, dtype=float).ravel()
    if values.size != grid.size:
        raise ValueError("sample count does not match grid")
    return HarmonicField(L, grid.basis(L).T @ (grid.weights * values))


def synthesize(f: HarmonicField, grid) -> np.ndarray:
    """Evaluate ``f`` at grid nodes (or at an array of points)."""
    if isinstance(grid, SphereGrid):
        return grid.basis(f.band_limit) @ f.coeffs
    return f(grid)


def laplacian(f: HarmonicField) -> HarmonicField:
    l = f.degrees
    return HarmonicField(f.band_limit, -l * (l + 1) * f.coeffs)


def sobolev_h2_norm(f: HarmonicField) -> float:
    lam = f.degrees * (f.degrees + 1.0)
    return float(np.sqrt(np.sum(f.coeffs ** 2 * (1.0 + lam + lam * lam))))


def green_function(p, q) -> np.ndarray | float:
    """Zero-mean Green's function of the round Laplacian.

    Vectorized over either argument; returns a float for two single points.
    """
    P = as_points(p)
    Q = as_points(q)
    d = np.linalg.norm(P - Q, axis=1)
    if np.any(d < 1e-14):
        raise SingularityError("Green's function is singular on the diagonal")
    g = -np.log(d) / (2.0 * math.pi) + GREEN_CONSTANT
    return float(g[0]) if g.size == 1 else g


def tangent_frame(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent vectors at the unit vector ``p``."""
    p = np.asarray(p, dtype=float)
    a = np.array([1.0, 0.0, 0.0]) if abs(p[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = a - (a @ p) * p
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(p, e1)


def _cap_log_integral(s: float) -> float:
    # -4 * int_0^s ln(2v) v dv, with s = sin(eps/2)
    if s == 0.0:
        return 0.0
    return -2.0 * s * s * math.log(2.0 * s) + s * s


def _polar_nodes(p, t_lo, t_hi, n_t, n_phi):
    """Nodes/weights for cos(theta) in [t_lo, t_hi] around pole ``p``."""
    x, w = np.polynomial.legendre.leggauss(n_t)
    t = 0.5 * (t_hi - t_lo) * x + 0.5 * (t_hi + t_lo)
    wt = 0.5 * (t_hi - t_lo) * w
    e1, e2 = tangent_frame(p)
    ph = 2.0 * math.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    pts = (s[:, None, None] * (np.cos(ph)[None, :, None] * e1 + np.sin(ph)[None, :, None] * e2)
           + t[:, None, None] * p)
    wts = wt[:, None] * np.full(n_phi, 2.0 * math.pi / n_phi)[None, :]
    return pts.reshape(-1, 3), wts.ravel()


def _half_angle_nodes(p, v_lo, v_hi, n_v, n_phi):
    """Nodes/weights around pole ``p`` for v = sin(theta/2) in [v_lo, v_hi].

    Uses dA = 4 v dv dphi; the log kernel is smooth in v away from v = 0.
    """
    x, w = np.polynomial.legendre.leggauss(n_v)
    v = 0.5 * (v_hi - v_lo) * x + 0.5 * (v_hi + v_lo)
    wv = 0.5 * (v_hi - v_lo) * w * 4.0 * v
    theta = 2.0 * np.arcsin(v)
    e1, e2 = tangent_frame(p)
    ph = 2.0 * math.pi * np.arange(n_phi) / n_phi
    pts = (np.sin(theta)[:, None, None] * (np.cos(ph)[None, :, None] * e1
                                           + np.sin(ph)[None, :, None] * e2)
           + np.cos(theta)[:, None, None] * p)
    wts = wv[:, None] * np.full(n_phi, 2.0 * math.pi / n_phi)[None, :]
    return pts.reshape(-1, 3), wts.ravel()


def green_integral(p, eps: float = 0.5, n_theta: int = 64, n_phi: int = 16) -> dict:
    """``int G(p, q) dA(q)`` split into a closed-form cap and regular quadrature.

    Returns the pieces; ``log_part`` is the integral of ``G - C`` and
    ``total`` should vanish.
    """
    P = as_points(p)[0]
    P = P / np.linalg.norm(P)
    s = math.sin(eps / 2.0)
    cap = _cap_log_integral(s)
    pts, w = _half_angle_nodes(P, s, 1.0, n_theta, n_phi)
    outside = float(w @ (green_function(P, pts) - GREEN_CONSTANT))
    log_part = cap + outside
    constant = GREEN_CONSTANT * FOUR_PI
    return {"cap": cap, "outside": outside, "log_part": log_part,
            "constant": constant, "total": log_part + constant}


def green_convolve(p, f: Callable[[np.ndarray], np.ndarray], eps: float = 0.2,
                   n_cap: int = 64, n_out: int = 128, n_phi: int = 64) -> float:
    """``int G(p, q) f(q) dA(q)`` for a smooth ``f``.

    The cap of radius ``eps`` uses ``v = sin(theta/2) = s^2``, which turns the
    logarithmic kernel into an integrable, smooth-enough weight.
    """
    P = as_points(p)[0]
    P = P / np.linalg.norm(P)
    pts, w = _polar_nodes(P, -1.0, math.cos(eps), n_out, n_phi)
    outside = float(w @ (green_function(P, pts) * f(pts)))

    smax = math.sqrt(math.sin(eps / 2.0))
    x, wx = np.polynomial.legendre.leggauss(n_cap)
    s = 0.5 * smax * (x + 1.0)
    ws = 0.5 * smax * wx
    v = s * s
    theta = 2.0 * np.arcsin(v)
    kern = -np.log(2.0 * v) / (2.0 * math.pi) + GREEN_CONSTANT
    # dA = sin(theta) dtheta dphi = 4 v dv dphi, dv = 2 s ds
    radial_w = ws * kern * 4.0 * v * 2.0 * s
    e1, e2 = tangent_frame(P)
    ph = 2.0 * math.pi * np.arange(n_phi) / n_phi
    q = (np.sin(theta)[:, None, None] * (np.cos(ph)[None, :, None] * e1
                                         + np.sin(ph)[None, :, None] * e2)
         + np.cos(theta)[:, None, None] * P)
    fv = f(q.reshape(-1, 3)).reshape(n_cap, n_phi)
    inside = float(radial_w @ fv.mean(axis=1)) * 2.0 * math.pi
    return outside + inside


def refine_extremum(fun, p0, maximize: bool, grad=None, tol: float = 1e-8,
                    max_steps: int = 50) -> tuple[float, np.ndarray]:
    """Polish a grid extremum of ``fun`` by local optimization in a tangent chart.

    ``fun`` maps ``(N, 3)`` unit points to values; ``grad`` (optional) returns
    tangential gradients ``(N, 3)``.
    """
    p0 = np.asarray(p0, dtype=float)
    e1, e2 = tangent_frame(p0)
    sign = -1.0 if maximize else 1.0

    def chart(s):
        q = p0 + s[0] * e1 + s[1] * e2
        return q / np.linalg.norm(q)

    def obj(s):
        return sign * float(fun(chart(s)[None, :])[0])

    jac = None
    if grad is not None:
        def jac(s):
            raw = p0 + s[0] * e1 + s[1] * e2
            r = np.linalg.norm(raw)
            q = raw / r
            g = grad(q[None, :])[0]
            proj = lambda e: (e - (e @ q) * q) / r
            return sign * np.array([g @ proj(e1), g @ proj(e2)])

    res = optimize.minimize(obj, np.zeros(2), jac=jac, method="BFGS",
                            options={"maxiter": max_steps, "gtol": 1e-13, "xrtol": tol})
    q = chart(res.x)
    val = float(fun(q[None, :])[0])
    start = float(fun(p0[None, :])[0])
    if (maximize and val < start) or (not maximize and val > start):
        return start, p0
    return val, q


def field_extrema(fun, grid: SphereGrid, grad=None, n_candidates: int = 4,
                  values: np.ndarray | None = None) -> tuple[float, np.ndarray, float, np.ndarray]:
    """Global min and max of ``fun`` on the sphere: grid scan, then local polish.

    Returns ``(min, argmin, max, argmax)``.
    """
    vals = fun(grid.xyz) if values is None else np.asarray(values).ravel()
    order = np.argsort(vals)
    best_min = (np.inf, None)
    for i in order[:n_candidates]:
        v, q = refine_extremum(fun, grid.xyz[i], maximize=False, grad=grad)
        if v < best_min[0]:
            best_min = (v, q)
    best_max = (-np.inf, None)
    for i in order[::-1][:n_candidates]:
        v, q = refine_extremum(fun, grid.xyz[i], maximize=True, grad=grad)
        if v > best_max[0]:
            best_max = (v, q)
    return best_min[0], best_min[1], best_max[0], best_max[1]


def default_grid(L: int) -> SphereGrid:
    return SphereGrid.for_band_limit(max(L, 8))


def extrema(f: HarmonicField, grid: SphereGrid | None = None):
    """``(min, argmin, max, argmax)`` of a harmonic field."""
    grid = default_grid(f.band_limit) if grid is None else grid
    return field_extrema(f, grid, grad=lambda q: f.value_and_grad(q)[1],
                         values=synthesize(f, grid))


def oscillation(f, grid: SphereGrid | None = None) -> float:
    """max - min over the sphere.

    ``f`` is a HarmonicField (extrema are polished) or raw samples on ``grid``.
    """
    if isinstance(f, HarmonicField):
        lo, _, hi, _ = extrema(f, grid)
        return hi - lo
    v = np.asarray(f, dtype=float)
    return float(v.max() - v.min())


def sup_norm(f: HarmonicField, grid: SphereGrid | None = None) -> float:
    lo, _, hi, _ = extrema(f, grid)
    return max(abs(lo), abs(hi))


def write_grid_csv(path, grid: SphereGrid, values) -> None:
    """Dump ``(theta, phi, value)`` rows."""
    th = np.repeat(grid.theta, grid.n_phi)
    ph = np.tile(grid.phi, grid.n_theta)
    vals = np.asarray(values, dtype=float).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "phi", "value"])
        for row in zip(th, ph, vals):
            w.writerow([f"{row[0]:.17g}", f"{row[1]:.17g}", f"{row[2]:.17g}"])
