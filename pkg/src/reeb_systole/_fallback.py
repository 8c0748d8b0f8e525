"""Pure numpy implementation of the hot kernels.

Mirrors :mod:`reeb_systole._core` function for function; used when the
compiled extension is unavailable and as the reference in benchmarks.

Real orthonormal harmonics are evaluated through their polynomial extension

    Y_lm(x) = sqrt(2) * Qbar_l^m(z) * Re((x + i y)^m)      m > 0
    Y_l0(x) = Qbar_l^0(z)
    Y_lm(x) = sqrt(2) * Qbar_l^|m|(z) * Im((x + i y)^|m|)  m < 0

where Qbar_l^m is the m-th derivative of the normalized Legendre polynomial.
The tangential gradient is the ambient gradient of that extension with the
radial part removed.
"""
import math

import numpy as np

from . import _tableau as tb

SQRT2 = math.sqrt(2.0)


def n_coeffs(L):
    return (L + 1) * (L + 1)


def _legendre_columns(L, z):
    """Yield ``(m, l, q, dq)`` with q = Qbar_l^m(z) and dq its z-derivative."""
    qmm = np.full_like(z, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(L + 1):
        if m > 0:
            qmm = qmm * math.sqrt((2.0 * m + 1.0) / (2.0 * m))
        q_prev2 = None
        dq_prev2 = None
        q_prev = qmm
        dq_prev = np.zeros_like(z)
        yield m, m, q_prev, dq_prev
        if m + 1 > L:
            continue
        f = math.sqrt(2.0 * m + 3.0)
        q = f * z * qmm
        dq = f * qmm
        yield m, m + 1, q, dq
        q_prev2, dq_prev2, q_prev, dq_prev = q_prev, dq_prev, q, dq
        for l in range(m + 2, L + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            q = a * (z * q_prev - b * q_prev2)
            dq = a * (q_prev + z * dq_prev - b * dq_prev2)
            yield m, l, q, dq
            q_prev2, dq_prev2, q_prev, dq_prev = q_prev, dq_prev, q, dq


def _azimuthal(L, x, y):
    """Re and Im of (x + i y)^m for m = 0..L."""
    c = np.empty((L + 1,) + x.shape)
    s = np.empty((L + 1,) + x.shape)
    c[0] = 1.0
    s[0] = 0.0
    for m in range(1, L + 1):
        c[m] = c[m - 1] * x - s[m - 1] * y
        s[m] = c[m - 1] * y + s[m - 1] * x
    return c, s


def basis(L, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    out = np.empty((pts.shape[0], n_coeffs(L)))
    c, s = _azimuthal(L, x, y)
    for m, l, q, _ in _legendre_columns(L, z):
        base = l * l + l
        if m == 0:
            out[:, base] = q
        else:
            out[:, base + m] = SQRT2 * q * c[m]
            out[:, base - m] = SQRT2 * q * s[m]
    return out


def basis_grad(L, pts):
    """Basis values ``(N, n)`` and tangential gradients ``(N, n, 3)``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    n = n_coeffs(L)
    val = np.empty((pts.shape[0], n))
    grad = np.empty((pts.shape[0], n, 3))
    c, s = _azimuthal(L, x, y)
    for m, l, q, dq in _legendre_columns(L, z):
        base = l * l + l
        if m == 0:
            val[:, base] = q
            grad[:, base, 0] = 0.0
            grad[:, base, 1] = 0.0
            grad[:, base, 2] = dq
            continue
        dcx = m * c[m - 1]
        dcy = -m * s[m - 1]
        dsx = m * s[m - 1]
        dsy = m * c[m - 1]
        val[:, base + m] = SQRT2 * q * c[m]
        grad[:, base + m, 0] = SQRT2 * q * dcx
        grad[:, base + m, 1] = SQRT2 * q * dcy
        grad[:, base + m, 2] = SQRT2 * dq * c[m]
        val[:, base - m] = SQRT2 * q * s[m]
        grad[:, base - m, 0] = SQRT2 * q * dsx
        grad[:, base - m, 1] = SQRT2 * q * dsy
        grad[:, base - m, 2] = SQRT2 * dq * s[m]
    radial = np.einsum("nkj,nj->nk", grad, pts)
    grad -= radial[:, :, None] * pts[:, None, :]
    return val, grad


def field_values(coeffs, L, pts):
    return basis(L, pts) @ np.asarray(coeffs, dtype=float)


def field_values_grad(coeffs, L, pts):
    coeffs = np.asarray(coeffs, dtype=float)
    val, grad = basis_grad(L, pts)
    return val @ coeffs, np.einsum("nkj,k->nj", grad, coeffs)


def _rhs_conformal(coeffs, L):
    def rhs(y):
        x = y[:3]
        v = y[3:]
        xh = x / math.sqrt(x @ x)
        _, g = field_values_grad(coeffs, L, xh[None, :])
        g = g[0]
        vv = v @ v
        acc = -vv * x - 2.0 * (g @ v) * v + vv * g
        return np.concatenate([v, acc])

    return rhs


def _rhs_ellipsoid(axes):
    inv2 = 1.0 / np.asarray(axes, dtype=float) ** 2

    def rhs(y):
        x = y[:3]
        v = y[3:]
        nrm = x * inv2
        lam = (v * v) @ inv2 / (nrm @ nrm)
        return np.concatenate([v, -lam * nrm])

    return rhs


def integrate(kind, params, L, y0, t_end, rtol, atol, h0, max_steps, record):
    """Adaptive DOP853 integration of the geodesic equation.

    Returns ``(t, y, n_steps, ts, ys)``; ``ts``/``ys`` are empty unless
    ``record`` is set, in which case every accepted step is stored.
    """
    if kind == tb.KIND_CONFORMAL:
        rhs = _rhs_conformal(np.asarray(params, dtype=float), L)
    elif kind == tb.KIND_ELLIPSOID:
        rhs = _rhs_ellipsoid(params)
    else:
        raise ValueError(f"unknown kind {kind}")
    A, B, C, E3, E5 = tb.A, tb.B, tb.C, tb.E3, tb.E5
    ns = tb.N_STAGES
    y = np.array(y0, dtype=float)
    t = 0.0
    h = h0 if h0 > 0 else 0.05
    f = rhs(y)
    K = np.empty((ns + 1, 6))
    ts = [t] if record else []
    ys = [y.copy()] if record else []
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            raise RuntimeError("maximum number of steps exceeded")
        h = min(h, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise RuntimeError("step size underflow")
        K[0] = f
        for s in range(1, ns):
            K[s] = rhs(y + h * (A[s, :s] @ K[:s]))
        y_new = y + h * (B @ K[:ns])
        f_new = rhs(y_new)
        K[ns] = f_new
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err5 = (K.T @ E5) / scale
        err3 = (K.T @ E3) / scale
        e5 = err5 @ err5
        e3 = err3 @ err3
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = h * e5 / math.sqrt((e5 + 0.01 * e3) * 6.0)
        if err < 1.0:
            t = t + h if t + h < t_end else t_end
            y = y_new
            f = f_new
            steps += 1
            if record:
                ts.append(t)
                ys.append(y.copy())
            fac = tb.MAX_FACTOR if err == 0.0 else min(
                tb.MAX_FACTOR, tb.SAFETY * err ** tb.ERROR_EXPONENT)
            h *= fac
        else:
            h *= max(tb.MIN_FACTOR, tb.SAFETY * err ** tb.ERROR_EXPONENT)
    return t, y, steps, np.array(ts), np.array(ys).reshape(-1, 6)
