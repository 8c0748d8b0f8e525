# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: real spherical harmonics and the DOP853 geodesic integrator.

Same functions and semantics as ``_fallback``; see that module for the
harmonic evaluation scheme.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, M_PI
from libc.stdlib cimport malloc, free

from . import _tableau as tb

cnp.import_array()

cdef double SQRT2 = 1.4142135623730951


def n_coeffs(int L):
    return (L + 1) * (L + 1)


cdef inline void _point_basis(int L, double x, double y, double z,
                              double* val, double* grad, double* cbuf,
                              double* sbuf, bint want_grad) noexcept nogil:
    """Fill val[k] (and grad[3k..3k+2] if requested) for one unit point."""
    cdef int m, l, base
    cdef double qmm, q, dq, qp, dqp, qp2, dqp2, a, b, f, rad
    cdef double dcx, dcy, dsx, dsy
    cbuf[0] = 1.0
    sbuf[0] = 0.0
    for m in range(1, L + 1):
        cbuf[m] = cbuf[m - 1] * x - sbuf[m - 1] * y
        sbuf[m] = cbuf[m - 1] * y + sbuf[m - 1] * x
    qmm = 1.0 / sqrt(4.0 * M_PI)
    for m in range(L + 1):
        if m > 0:
            qmm = qmm * sqrt((2.0 * m + 1.0) / (2.0 * m))
        if m > 0:
            dcx = m * cbuf[m - 1]
            dcy = -m * sbuf[m - 1]
            dsx = m * sbuf[m - 1]
            dsy = m * cbuf[m - 1]
        qp2 = 0.0
        dqp2 = 0.0
        qp = 0.0
        dqp = 0.0
        for l in range(m, L + 1):
            if l == m:
                q = qmm
                dq = 0.0
            elif l == m + 1:
                f = sqrt(2.0 * m + 3.0)
                q = f * z * qmm
                dq = f * qmm
            else:
                a = sqrt((4.0 * l * l - 1.0) / (<double>(l * l - m * m)))
                b = sqrt(((l - 1.0) * (l - 1.0) - m * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0))
                q = a * (z * qp - b * qp2)
                dq = a * (qp + z * dqp - b * dqp2)
            qp2 = qp
            dqp2 = dqp
            qp = q
            dqp = dq
            base = l * l + l
            if m == 0:
                val[base] = q
                if want_grad:
                    grad[3 * base] = 0.0
                    grad[3 * base + 1] = 0.0
                    grad[3 * base + 2] = dq
            else:
                val[base + m] = SQRT2 * q * cbuf[m]
                val[base - m] = SQRT2 * q * sbuf[m]
                if want_grad:
                    grad[3 * (base + m)] = SQRT2 * q * dcx
                    grad[3 * (base + m) + 1] = SQRT2 * q * dcy
                    grad[3 * (base + m) + 2] = SQRT2 * dq * cbuf[m]
                    grad[3 * (base - m)] = SQRT2 * q * dsx
                    grad[3 * (base - m) + 1] = SQRT2 * q * dsy
                    grad[3 * (base - m) + 2] = SQRT2 * dq * sbuf[m]
    if want_grad:
        for l in range((L + 1) * (L + 1)):
            rad = grad[3 * l] * x + grad[3 * l + 1] * y + grad[3 * l + 2] * z
            grad[3 * l] -= rad * x
            grad[3 * l + 1] -= rad * y
            grad[3 * l + 2] -= rad * z


def basis(int L, pts):
    cdef const double[:, ::1] P = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
    cdef Py_ssize_t N = P.shape[0], i
    cdef int n = (L + 1) * (L + 1)
    out = np.empty((N, n))
    cdef double[:, ::1] O = out
    cdef double* cbuf = <double*> malloc((L + 1) * sizeof(double))
    cdef double* sbuf = <double*> malloc((L + 1) * sizeof(double))
    try:
        with nogil:
            for i in range(N):
                _point_basis(L, P[i, 0], P[i, 1], P[i, 2], &O[i, 0], NULL,
                             cbuf, sbuf, False)
    finally:
        free(cbuf)
        free(sbuf)
    return out


def basis_grad(int L, pts):
    cdef const double[:, ::1] P = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
    cdef Py_ssize_t N = P.shape[0], i
    cdef int n = (L + 1) * (L + 1)
    val = np.empty((N, n))
    grad = np.empty((N, n, 3))
    cdef double[:, ::1] V = val
    cdef double[:, :, ::1] G = grad
    cdef double* cbuf = <double*> malloc((L + 1) * sizeof(double))
    cdef double* sbuf = <double*> malloc((L + 1) * sizeof(double))
    try:
        with nogil:
            for i in range(N):
                _point_basis(L, P[i, 0], P[i, 1], P[i, 2], &V[i, 0], &G[i, 0, 0],
                             cbuf, sbuf, True)
    finally:
        free(cbuf)
        free(sbuf)
    return val, grad


cdef struct FieldWork:
    int L
    int n
    const double* coeffs
    double* val
    double* grad
    double* cbuf
    double* sbuf


cdef inline void _field_at(FieldWork* w, double x, double y, double z,
                           double* out_val, double* out_grad) noexcept nogil:
    cdef int k
    cdef double s = 0.0, gx = 0.0, gy = 0.0, gz = 0.0, c
    _point_basis(w.L, x, y, z, w.val, w.grad, w.cbuf, w.sbuf, True)
    for k in range(w.n):
        c = w.coeffs[k]
        s += c * w.val[k]
        gx += c * w.grad[3 * k]
        gy += c * w.grad[3 * k + 1]
        gz += c * w.grad[3 * k + 2]
    out_val[0] = s
    out_grad[0] = gx
    out_grad[1] = gy
    out_grad[2] = gz


cdef FieldWork* _work_new(const double[::1] coeffs, int L):
    cdef FieldWork* w = <FieldWork*> malloc(sizeof(FieldWork))
    w.L = L
    w.n = (L + 1) * (L + 1)
    w.coeffs = &coeffs[0]
    w.val = <double*> malloc(w.n * sizeof(double))
    w.grad = <double*> malloc(3 * w.n * sizeof(double))
    w.cbuf = <double*> malloc((L + 1) * sizeof(double))
    w.sbuf = <double*> malloc((L + 1) * sizeof(double))
    return w


cdef void _work_free(FieldWork* w):
    free(w.val)
    free(w.grad)
    free(w.cbuf)
    free(w.sbuf)
    free(w)


def field_values(coeffs, int L, pts):
    cdef const double[::1] C = np.ascontiguousarray(coeffs, dtype=float)
    cdef const double[:, ::1] P = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
    cdef Py_ssize_t N = P.shape[0], i
    out = np.empty(N)
    cdef double[::1] O = out
    cdef double g[3]
    cdef FieldWork* w = _work_new(C, L)
    try:
        with nogil:
            for i in range(N):
                _field_at(w, P[i, 0], P[i, 1], P[i, 2], &O[i], g)
    finally:
        _work_free(w)
    return out


def field_values_grad(coeffs, int L, pts):
    cdef const double[::1] C = np.ascontiguousarray(coeffs, dtype=float)
    cdef const double[:, ::1] P = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
    cdef Py_ssize_t N = P.shape[0], i
    out = np.empty(N)
    grad = np.empty((N, 3))
    cdef double[::1] O = out
    cdef double[:, ::1] G = grad
    cdef FieldWork* w = _work_new(C, L)
    try:
        with nogil:
            for i in range(N):
                _field_at(w, P[i, 0], P[i, 1], P[i, 2], &O[i], &G[i, 0])
    finally:
        _work_free(w)
    return out, grad


cdef inline void _rhs(int kind, FieldWork* w, double* axes_inv2,
                      double* y, double* f) noexcept nogil:
    cdef double r, xh0, xh1, xh2, vv, gv, phi, lam, n0, n1, n2
    cdef double g[3]
    f[0] = y[3]
    f[1] = y[4]
    f[2] = y[5]
    vv = y[3] * y[3] + y[4] * y[4] + y[5] * y[5]
    if kind == 0:
        r = sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
        xh0 = y[0] / r
        xh1 = y[1] / r
        xh2 = y[2] / r
        _field_at(w, xh0, xh1, xh2, &phi, g)
        gv = g[0] * y[3] + g[1] * y[4] + g[2] * y[5]
        f[3] = -vv * y[0] - 2.0 * gv * y[3] + vv * g[0]
        f[4] = -vv * y[1] - 2.0 * gv * y[4] + vv * g[1]
        f[5] = -vv * y[2] - 2.0 * gv * y[5] + vv * g[2]
    else:
        n0 = y[0] * axes_inv2[0]
        n1 = y[1] * axes_inv2[1]
        n2 = y[2] * axes_inv2[2]
        lam = (y[3] * y[3] * axes_inv2[0] + y[4] * y[4] * axes_inv2[1]
               + y[5] * y[5] * axes_inv2[2]) / (n0 * n0 + n1 * n1 + n2 * n2)
        f[3] = -lam * n0
        f[4] = -lam * n1
        f[5] = -lam * n2


def integrate(int kind, params, int L, y0, double t_end, double rtol,
              double atol, double h0, long max_steps, bint record):
    """Adaptive DOP853 integration; see ``_fallback.integrate``."""
    cdef const double[:, ::1] A = tb.A
    cdef const double[::1] B = tb.B
    cdef const double[::1] E3 = tb.E3
    cdef const double[::1] E5 = tb.E5
    cdef int ns = tb.N_STAGES
    cdef double expo = tb.ERROR_EXPONENT
    cdef double safety = tb.SAFETY, min_fac = tb.MIN_FACTOR, max_fac = tb.MAX_FACTOR
    cdef const double[::1] P = np.ascontiguousarray(params, dtype=float)
    cdef double axes_inv2[3]
    cdef FieldWork* w = NULL
    cdef double y[6]
    cdef double ynew[6]
    cdef double ytmp[6]
    cdef double K[13][6]
    cdef double t = 0.0, h, err, e3, e5, sc, d3, d5, fac
    cdef long steps = 0
    cdef int s, j, i
    cdef const double[::1] Y0 = np.ascontiguousarray(y0, dtype=float)
    ts = []
    ys = []
    if kind == 0:
        w = _work_new(P, L)
    elif kind == 1:
        for i in range(3):
            axes_inv2[i] = 1.0 / (P[i] * P[i])
    else:
        raise ValueError(f"unknown kind {kind}")
    try:
        for i in range(6):
            y[i] = Y0[i]
        h = h0 if h0 > 0 else 0.05
        _rhs(kind, w, axes_inv2, y, K[0])
        if record:
            ts.append(0.0)
            ys.append([y[i] for i in range(6)])
        while t < t_end:
            if steps >= max_steps:
                raise RuntimeError("maximum number of steps exceeded")
            if h > t_end - t:
                h = t_end - t
            if h < 1e-14 * (1.0 if fabs(t) < 1.0 else fabs(t)):
                raise RuntimeError("step size underflow")
            with nogil:
                for s in range(1, ns):
                    for i in range(6):
                        ytmp[i] = y[i]
                        for j in range(s):
                            ytmp[i] += h * A[s, j] * K[j][i]
                    _rhs(kind, w, axes_inv2, ytmp, K[s])
                for i in range(6):
                    ynew[i] = y[i]
                    for j in range(ns):
                        ynew[i] += h * B[j] * K[j][i]
                _rhs(kind, w, axes_inv2, ynew, K[ns])
                e3 = 0.0
                e5 = 0.0
                for i in range(6):
                    sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(ynew[i]) else fabs(ynew[i]))
                    d3 = 0.0
                    d5 = 0.0
                    for j in range(ns + 1):
                        d3 += K[j][i] * E3[j]
                        d5 += K[j][i] * E5[j]
                    d3 /= sc
                    d5 /= sc
                    e3 += d3 * d3
                    e5 += d5 * d5
                if e5 == 0.0 and e3 == 0.0:
                    err = 0.0
                else:
                    err = h * e5 / sqrt((e5 + 0.01 * e3) * 6.0)
            if err < 1.0:
                t = t + h if t + h < t_end else t_end
                for i in range(6):
                    y[i] = ynew[i]
                    K[0][i] = K[ns][i]
                steps += 1
                if record:
                    ts.append(t)
                    ys.append([y[i] for i in range(6)])
                if err == 0.0:
                    fac = max_fac
                else:
                    fac = safety * pow(err, expo)
                    if fac > max_fac:
                        fac = max_fac
                h *= fac
            else:
                fac = safety * pow(err, expo)
                if fac < min_fac:
                    fac = min_fac
                h *= fac
    finally:
        if w != NULL:
            _work_free(w)
    yout = np.array([y[i] for i in range(6)])
    return t, yout, steps, np.array(ts), np.array(ys, dtype=float).reshape(-1, 6)
