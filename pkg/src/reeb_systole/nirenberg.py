"""Prescribed Gauss curvature on the sphere and the pinching-to-balance chain.

The Gauss equation ``Delta u = 1 - K e^{2u}`` is solved spectrally for a mean
zero ``u``. A positive ``K`` is only solvable up to scale, so the solver also
returns a factor ``s`` with ``e^{2u} g0`` having curvature ``s K``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.special import polygamma

from .sphere import (FOUR_PI, HarmonicField, SphereGrid, extrema, field_extrema,
                     laplacian, oscillation, sobolev_h2_norm, sup_norm)

CS_SERIES_LIMIT = math.pi ** 2 / 3.0 + 2.0
CS_UPPER = 0.5 * math.sqrt(CS_SERIES_LIMIT / math.pi)
CP_UPPER = math.sqrt(7.0) / 2.0
CHAIN_FACTOR = 2.0 * CS_UPPER * CP_UPPER


class GaussSolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


# --- constants -------------------------------------------------------------------

def cs_term(l: int) -> Fraction:
    """Exact term (2l+1)^2 / (1 + l(l+1) + l^2 (l+1)^2) of the embedding series."""
    lam = l * (l + 1)
    return Fraction((2 * l + 1) ** 2, 1 + lam + lam * lam)


def cs_tail_bound(L: int) -> float:
    """Sum over l > L of 1/l^2 + 2/(l(l+1)) + 1/(l+1)^2, which dominates the terms."""
    return float(polygamma(1, L + 1) + 2.0 / (L + 1) + polygamma(1, L + 2))


@dataclass(frozen=True)
class ConstantsReport:
    truncation: int
    cs_partial: float
    cs_tail_bound: float
    cs_upper: float = CS_UPPER
    cp_upper: float = CP_UPPER
    chain_factor: float = CHAIN_FACTOR

    @property
    def cs_from_series(self) -> float:
        """Embedding constant implied by partial sum plus tail bound."""
        return math.sqrt((self.cs_partial + self.cs_tail_bound) / FOUR_PI)

    def to_dict(self) -> dict:
        return {"truncation": self.truncation, "cs_partial": self.cs_partial,
                "cs_tail_bound": self.cs_tail_bound,
                "cs_partial_plus_tail": self.cs_partial + self.cs_tail_bound,
                "cs_series_limit": CS_SERIES_LIMIT, "cs_from_series": self.cs_from_series,
                "cs_upper": self.cs_upper, "cp_upper": self.cp_upper,
                "chain_factor": self.chain_factor}


def cs_series(L: int) -> ConstantsReport:
    """Partial sum of the embedding series through degree ``L`` and its tail bound."""
    if L < 0:
        raise ValueError("truncation must be nonnegative")
    partial = float(sum((cs_term(l) for l in range(L + 1)), Fraction(0)))
    return ConstantsReport(L, partial, cs_tail_bound(L))


def cp_ratio(l: int) -> float:
    """H^2 norm squared over Laplacian L^2 norm squared for a degree-l harmonic.

    The ratio is ``1 + 1/lambda + 1/lambda^2`` with ``lambda = l(l+1)``. It is
    largest at ``l = 1``, where ``lambda_1 = 2`` is the first nonzero eigenvalue
    of the unit round sphere (so ``1/lambda_1 = 1/2``), giving 7/4.
    """
    if l < 1:
        raise ValueError("degree 0 lies in the Laplacian kernel")
    lam = l * (l + 1)
    return (1 + lam + lam * lam) / lam ** 2


def log_beta_delta_bound(delta: float) -> float:
    """Natural log of :func:`beta_delta_bound`, finite where the bound underflows."""
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    E = math.e / delta + 1.0
    # sqrt(e^E / delta^2 - 1) without overflow; below delta ~ 2e-3 the log itself
    # is beyond double range and the bound is reported as -inf
    log_root = 0.5 * E - math.log(delta) + 0.5 * math.log(-math.expm1(2 * math.log(delta) - E))
    if log_root > 700.0:
        return -math.inf
    return -2.0 * math.sqrt(7.0 * CS_SERIES_LIMIT) * math.exp(log_root)


def beta_delta_bound(delta: float) -> float:
    """Lower bound on the fiber balance of an antipodal delta-pinched metric."""
    return math.exp(log_beta_delta_bound(delta))


# --- prescribed curvature ---------------------------------------------------------

_CHECK_GRID = SphereGrid(32, 64)


def _antipodal_gap(fun, grid=_CHECK_GRID) -> float:
    p = grid.xyz
    return float(np.max(np.abs(fun(p) - fun(-p))))


@dataclass(frozen=True, eq=False)
class PrescribedCurvature:
    """A curvature function ``K(points)``; the antipodal flag is verified."""

    fun: Callable[[np.ndarray], np.ndarray]
    antipodal: bool = False
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.antipodal and _antipodal_gap(self.fun) >= 1e-10:
            raise ValueError("curvature flagged antipodal but K(p) != K(-p)")

    @classmethod
    def constant(cls, value: float = 1.0) -> "PrescribedCurvature":
        return cls(lambda p: np.full(len(np.atleast_2d(p)), float(value)), True,
                   {"kind": "constant", "value": float(value)})

    @classmethod
    def from_field(cls, f: HarmonicField, exponential: bool = False) -> "PrescribedCurvature":
        """K = f, or K = exp(f) when ``exponential``."""
        fun = (lambda p: np.exp(f(p))) if exponential else f
        kind = "exp_harmonic" if exponential else "harmonic"
        return cls(fun, f.is_antipodal(1e-14), {"kind": kind, "field": f.to_dict()})

    @classmethod
    def manufactured(cls, u: HarmonicField) -> "PrescribedCurvature":
        """Curvature of ``e^{2u} g0``, namely ``e^{-2u} (1 - Delta u)``."""
        lap = laplacian(u)
        return cls(lambda p: np.exp(-2.0 * u(p)) * (1.0 - lap(p)), u.is_antipodal(1e-14),
                   {"kind": "manufactured", "u": u.to_dict()})

    @classmethod
    def from_metric(cls, metric) -> "PrescribedCurvature":
        return cls(metric.curvature_at, metric.is_antipodal(),
                   {"kind": "metric", "metric": metric.to_dict()})

    @classmethod
    def from_dict(cls, d: dict) -> "PrescribedCurvature":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(float(d.get("value", 1.0)))
        if kind in ("harmonic", "exp_harmonic"):
            return cls.from_field(HarmonicField.from_dict(d["field"]), kind == "exp_harmonic")
        if kind == "manufactured":
            return cls.manufactured(HarmonicField.from_dict(d["u"]))
        if kind == "metric":
            from .metrics import metric_from_dict
            return cls.from_metric(metric_from_dict(d["metric"]))
        raise ValueError(f"unknown curvature kind {kind!r}")

    @classmethod
    def load(cls, path) -> "PrescribedCurvature":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def values(self, grid: SphereGrid) -> np.ndarray:
        return np.asarray(self.fun(grid.xyz), dtype=float)

    def extremes(self, grid: SphereGrid | None = None) -> tuple[float, float]:
        grid = SphereGrid(64, 128) if grid is None else grid
        lo, _, hi, _ = field_extrema(self.fun, grid, values=self.values(grid))
        return lo, hi


# --- solver -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussSolution:
    u: HarmonicField
    scale: float
    residual: float
    iterations: int
    gauss_bonnet: float
    curvature: PrescribedCurvature = field(repr=False)
    history: tuple = field(default=(), repr=False)

    def solved_curvature(self, pts) -> np.ndarray:
        """Curvature of ``e^{2u} g0``, i.e. ``scale * K``."""
        return self.scale * self.curvature.fun(pts)

    def to_dict(self) -> dict:
        return {"u": self.u.to_dict(), "scale": self.scale, "residual": self.residual,
                "iterations": self.iterations, "gauss_bonnet": self.gauss_bonnet}


def _solver_grid(L: int) -> SphereGrid:
    return SphereGrid(2 * L + 8, 4 * L + 16)


def solve_gauss_equation(K: PrescribedCurvature, L: int = 32, tol: float = 1e-8,
                         max_iter: int = 60, grid: SphereGrid | None = None) -> GaussSolution:
    """Damped Newton iteration for ``Delta u - 1 + s K e^{2u} = 0`` with mean-zero ``u``.

    Unknowns are the coefficients of degree 1..L (even degrees only for
    antipodal K) and ``log s``; the equation is projected on the same degrees
    plus the constant mode, which keeps the system square and pins the scale.
    """
    grid = _solver_grid(L) if grid is None else grid
    Kv = K.values(grid)
    if np.any(Kv <= 0):
        raise ValueError("prescribed curvature must be positive")
    Y = grid.basis(L)
    w = grid.weights
    l = HarmonicField.zeros(L).degrees
    lam = l * (l + 1.0)
    free = (l >= 1) & ((l % 2 == 0) if K.antipodal else True)
    rows = free | (l == 0)
    Yr = Y[:, rows]
    Yf = Y[:, free]
    lam_r = lam[rows]
    a = np.zeros(len(l))
    c = math.log(FOUR_PI / grid.integrate(Kv))

    def residual(a, c):
        N = np.exp(c + 2.0 * (Y @ a)) * Kv
        r = -lam_r * a[rows] + Yr.T @ (w * N)
        r[0] -= math.sqrt(FOUR_PI)
        return r, N

    r, N = residual(a, c)
    rn = float(np.linalg.norm(r))
    history = [rn]
    it = 0
    while it < max_iter:
        if rn < 1e-13:
            break
        J = np.empty((rows.sum(), free.sum() + 1))
        J[:, :-1] = Yr.T @ (Yf * (2.0 * w * N)[:, None])
        J[np.arange(rows.sum())[free[rows]], np.arange(free.sum())] -= lam[free]
        J[:, -1] = Yr.T @ (w * N)
        dx = linalg.solve(J, -r)
        t = 1.0
        for _ in range(21):
            a_try = a.copy()
            a_try[free] += t * dx[:-1]
            c_try = c + t * dx[-1]
            r_try, N_try = residual(a_try, c_try)
            rn_try = float(np.linalg.norm(r_try))
            if np.isfinite(rn_try) and rn_try < rn:
                break
            t *= 0.5
        else:
            break
        it += 1
        a, c, r, N = a_try, c_try, r_try, N_try
        step = t * float(np.max(np.abs(dx)))
        rn = rn_try
        history.append(rn)
        if step < 1e-15:
            break

    u = HarmonicField(L, a)
    scale = math.exp(c)
    check = SphereGrid(2 * L + 16, 4 * L + 32)
    pts = check.xyz
    Nc = scale * K.values(check) * np.exp(2.0 * u(pts))
    res = float(np.max(np.abs(laplacian(u)(pts) - 1.0 + Nc)))
    gb = check.integrate(Nc)
    if not res < tol:
        raise GaussSolverError(f"no convergence to {tol:g} after {it} Newton steps", res)
    return GaussSolution(u, scale, res, it, gb, K, tuple(history))


# --- a priori bound checks ----------------------------------------------------------

def _require_even_mean_zero(u: HarmonicField, tol: float = 1e-10):
    if abs(u.mean) > tol:
        raise ValueError("field must have zero mean")
    if not u.is_antipodal(tol):
        raise ValueError("field must be antipodally symmetric (even degrees only)")


def check_onofri(u: HarmonicField, grid: SphereGrid | None = None) -> float:
    """``(1/8) int |grad u|^2 dsigma0 - ln int e^u dsigma0`` with dsigma0 = dA / 4 pi."""
    _require_even_mean_zero(u)
    grid = SphereGrid.for_band_limit(4 * u.band_limit + 24) if grid is None else grid
    lhs = math.log(grid.integrate(np.exp(grid.basis(u.band_limit) @ u.coeffs)) / FOUR_PI)
    rhs = u.grad_energy() / (8.0 * FOUR_PI)
    return rhs - lhs


def check_min_bound(sol: GaussSolution) -> float:
    """``min u - (mean u - 1)``; nonnegative for every solution."""
    lo, _, _, _ = extrema(sol.u)
    return lo - (sol.u.mean - 1.0)


@dataclass(frozen=True)
class GradientBound:
    energy: float
    k_min: float
    k_max: float
    first_rhs: float | None
    delta_rhs: float

    @property
    def delta(self) -> float:
        return self.k_min / self.k_max

    @property
    def first_margin(self) -> float | None:
        return None if self.first_rhs is None else self.first_rhs - self.energy

    @property
    def delta_margin(self) -> float:
        return self.delta_rhs - self.energy

    def to_dict(self) -> dict:
        return {"energy": self.energy, "k_min": self.k_min, "k_max": self.k_max,
                "delta": self.delta, "first_rhs": self.first_rhs,
                "first_margin": self.first_margin,
                "first_status": "ok" if self.first_rhs is not None else "inapplicable",
                "delta_rhs": self.delta_rhs, "delta_margin": self.delta_margin}


def gradient_bounds(energy: float, k_min: float, k_max: float) -> GradientBound:
    x = k_min * math.exp(-2.0)
    first = None if x >= 1.0 else (1.0 - x) / (2.0 * x) * math.log(k_max / (1.0 - x))
    return GradientBound(energy, k_min, k_max, first, 0.5 * (math.e * k_max / k_min + 1.0))


def check_gradient_bound(sol: GaussSolution, K: PrescribedCurvature | None = None,
                         grid: SphereGrid | None = None) -> GradientBound:
    """Dirichlet energy ``int |grad u|^2 dsigma0`` against its two curvature bounds.

    Curvatures are those of the solved metric ``e^{2u} g0``.
    """
    K = sol.curvature if K is None else K
    kmin, kmax = K.extremes(grid)
    return gradient_bounds(sol.u.grad_energy() / FOUR_PI, sol.scale * kmin, sol.scale * kmax)


@dataclass(frozen=True)
class OscillationChain:
    oscillation: float
    twice_sup: float
    sobolev: float
    laplacian: float

    @property
    def values(self) -> tuple[float, float, float, float]:
        return (self.oscillation, self.twice_sup, self.sobolev, self.laplacian)

    @property
    def monotone(self) -> bool:
        v = self.values
        return all(v[i] <= v[i + 1] * (1 + 1e-12) + 1e-14 for i in range(3))

    def to_dict(self) -> dict:
        return {"oscillation": self.oscillation, "twice_sup": self.twice_sup,
                "sobolev": self.sobolev, "laplacian": self.laplacian,
                "monotone": self.monotone}


def oscillation_chain(u) -> OscillationChain:
    """osc(u) <= 2 |u0|_C0 <= 2 C_S |u0|_H2 <= 2 C_S C_P |Delta u0|_L2, with u0 = u - mean."""
    u = u.u if isinstance(u, GaussSolution) else u
    u0 = u.zero_mean()
    return OscillationChain(oscillation(u0), 2.0 * sup_norm(u0),
                            2.0 * CS_UPPER * sobolev_h2_norm(u0),
                            CHAIN_FACTOR * laplacian(u0).l2_norm())
