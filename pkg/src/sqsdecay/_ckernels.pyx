# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the oscillatory-quadrature, Hilbert and Volterra loops."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, log, log1p, fabs

cnp.import_array()

cdef double _RECIP[32]
for _j in range(1, 32):
    _RECIP[_j] = 1.0 / _j


cdef inline void _moments(double th, double complex* M) noexcept nogil:
    cdef double complex z, p, e
    cdef int n, k
    if fabs(th) < 0.5:
        z = -1j * th
        for k in range(4):
            M[k] = 0
        # (-i th)^n / n! terms; stop once they drop below double precision
        p = 1.0
        for n in range(24):
            for k in range(4):
                M[k] = M[k] + p * _RECIP[n + k + 1]
            p = p * z * _RECIP[n + 1]
            if fabs(p.real) + fabs(p.imag) < 1e-17:
                break
    else:
        e = cos(th) - 1j * sin(th)
        M[0] = (1.0 - e) / (1j * th)
        for k in range(1, 4):
            M[k] = 1j * (e - k * M[k - 1]) / th


def filon_sum(const double[::1] x, const double complex[:, ::1] coef, taus):
    cdef const double[::1] t = np.ascontiguousarray(np.atleast_1d(taus), dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0] - 1, nt = t.shape[0], i, j
    cdef double complex[::1] out = np.empty(nt, dtype=np.complex128)
    cdef double complex M[4]
    cdef double complex acc, loc
    cdef double h, tau, ph
    with nogil:
        for j in range(nt):
            tau = t[j]
            acc = 0
            for i in range(n):
                h = x[i + 1] - x[i]
                _moments(h * tau, M)
                loc = coef[i, 0] * M[0] + coef[i, 1] * M[1] + coef[i, 2] * M[2] + coef[i, 3] * M[3]
                ph = x[i] * tau
                acc = acc + h * (cos(ph) - 1j * sin(ph)) * loc
            out[j] = acc
    return np.asarray(out)


def filon_sum_uniform(const double[::1] x, const double complex[:, :, ::1] coef, double dtau, Py_ssize_t n):
    """filon_sum at tau = k dtau, k = 0..n, for several coefficient sets at once.

    ``coef`` has shape (nf, N, 4); the result has shape (nf, n + 1).  Phases
    are advanced by complex multiplication instead of cos/sin calls.
    """
    cdef Py_ssize_t N = x.shape[0] - 1, nf = coef.shape[0], i, k, f
    cdef double complex[:, ::1] out = np.zeros((nf, n + 1), dtype=np.complex128)
    cdef double complex M[4]
    cdef double complex ph, step_ph, e, step_e, w
    cdef double h, th, dth, inv
    with nogil:
        for i in range(N):
            h = x[i + 1] - x[i]
            dth = h * dtau
            step_ph = cos(x[i] * dtau) - 1j * sin(x[i] * dtau)
            step_e = cos(dth) - 1j * sin(dth)
            ph = h
            e = 1.0
            for k in range(n + 1):
                th = k * dth
                if fabs(th) < 0.5:
                    _moments(th, M)
                else:
                    inv = 1.0 / th
                    M[0] = (1.0 - e) * (-1j * inv)
                    M[1] = 1j * (e - M[0]) * inv
                    M[2] = 1j * (e - 2 * M[1]) * inv
                    M[3] = 1j * (e - 3 * M[2]) * inv
                for f in range(nf):
                    w = coef[f, i, 0] * M[0] + coef[f, i, 1] * M[1] + coef[f, i, 2] * M[2] + coef[f, i, 3] * M[3]
                    out[f, k] = out[f, k] + ph * w
                ph = ph * step_ph
                e = e * step_e
    return np.asarray(out)


def filon_moments(theta):
    cdef const double[::1] th = np.ascontiguousarray(np.atleast_1d(theta), dtype=np.float64)
    cdef Py_ssize_t n = th.shape[0], i
    cdef double complex[:, ::1] out = np.empty((n, 4), dtype=np.complex128)
    cdef double complex M[4]
    for i in range(n):
        _moments(th[i], M)
        out[i, 0] = M[0]
        out[i, 1] = M[1]
        out[i, 2] = M[2]
        out[i, 3] = M[3]
    return np.asarray(out).reshape(np.shape(theta) + (4,))


cdef inline double _xml(double s) noexcept nogil:
    cdef double acc, p
    cdef int k
    if fabs(s) < 1e-2:
        acc = 0.0
        p = s * s
        for k in range(2, 10):
            if k % 2 == 0:
                acc = acc + p / k
            else:
                acc = acc - p / k
            p = p * s
        return acc
    return s - log1p(s)


def pv_linear(const double[::1] x, const double[::1] f, y):
    cdef const double[::1] yy = np.ascontiguousarray(np.atleast_1d(y), dtype=np.float64)
    cdef Py_ssize_t N = x.shape[0] - 1, ny = yy.shape[0], i, j
    cdef double[::1] m = np.empty(N)
    cdef double[::1] out = np.empty(ny)
    cdef double acc, d, e, h, s, g, la, lb, yv
    with nogil:
        for i in range(N):
            m[i] = (f[i + 1] - f[i]) / (x[i + 1] - x[i])
        for j in range(ny):
            yv = yy[j]
            acc = 0.0
            for i in range(N):
                d = x[i] - yv
                e = x[i + 1] - yv
                h = x[i + 1] - x[i]
                if (d > 0 or e < 0) and d != 0 and e != 0:
                    s = h / d
                    if fabs(s) < 0.5:
                        acc = acc + f[i] * log1p(s) + m[i] * d * _xml(s)
                    else:
                        la = log(e / d)
                        acc = acc + f[i] * la + m[i] * d * (s - la)
                else:
                    g = f[i] - m[i] * d
                    la = log(fabs(d)) if d != 0 else 0.0
                    lb = log(fabs(e)) if e != 0 else 0.0
                    acc = acc + g * (lb - la) + m[i] * h
            out[j] = acc
    return np.asarray(out)


def cauchy_sum(const double[::1] xq, const double[::1] wq, const double[::1] y):
    """sum_q wq[q] / (xq[q] - y[j]) for every j; the points xq must avoid y."""
    cdef Py_ssize_t nq = xq.shape[0], ny = y.shape[0], i, j
    cdef double[::1] out = np.empty(ny)
    cdef double acc, yv
    with nogil:
        for j in range(ny):
            yv = y[j]
            acc = 0.0
            for i in range(nq):
                acc = acc + wq[i] / (xq[i] - yv)
            out[j] = acc
    return np.asarray(out)


def volterra_march(W0, W1, W2, Py_ssize_t n):
    cdef double complex[::1] w0 = np.ascontiguousarray(W0, dtype=np.complex128)
    cdef double complex[::1] w1 = np.ascontiguousarray(W1, dtype=np.complex128)
    cdef double complex[::1] w2 = np.ascontiguousarray(W2, dtype=np.complex128)
    cdef double complex[::1] cR = np.empty(n + 1, dtype=np.complex128)
    cdef double complex[::1] cC = np.empty(n + 1, dtype=np.complex128)
    cdef double complex[::1] cL = np.empty(n + 1, dtype=np.complex128)
    cdef double complex[::1] a = np.zeros(n + 1, dtype=np.complex128)
    cdef double complex acc, diag
    cdef Py_ssize_t k, j
    with nogil:
        for k in range(n + 1):
            cR[k] = 0.5 * (2 * w0[k] - 3 * w1[k] + w2[k])
            cC[k] = 2 * w1[k] - w2[k]
            cL[k] = 0.5 * (w2[k] - w1[k])
        a[0] = 1.0
        if n >= 1:
            a[1] = (1.0 - w1[0]) / (1.0 + w0[0] - w1[0])
        for k in range(2, n + 1):
            acc = 1.0 - 0.5 * (w1[k - 1] + w2[k - 1]) - a[1] * (w0[k - 1] - w2[k - 1])
            diag = 1.0 + cR[0]
            if k == 2:
                diag = diag + 0.5 * (w2[1] - w1[1])
            else:
                acc = acc - a[2] * 0.5 * (w2[k - 1] - w1[k - 1])
            for j in range(1, k):
                # step j interpolates through nodes j-1, j, j+1
                if j + 1 < k:
                    acc = acc - a[j + 1] * cR[k - 1 - j]
                acc = acc - a[j] * cC[k - 1 - j] - a[j - 1] * cL[k - 1 - j]
            a[k] = acc / diag
    return np.asarray(a)
