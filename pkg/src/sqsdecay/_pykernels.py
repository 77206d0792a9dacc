"""NumPy implementations of the hot loops (fallback backend)."""
import numpy as np

_SERIES_TERMS = 24
_NK = 4


def filon_moments(theta):
    """M_k(theta) = int_0^1 t^k exp(-i theta t) dt for k = 0..3, shape (n, 4)."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape + (_NK,), dtype=complex)
    small = np.abs(theta) < 0.5
    if np.any(small):
        th = theta[small]
        z = -1j * th
        acc = np.zeros(th.shape + (_NK,), dtype=complex)
        p = np.ones_like(z)
        fact = 1.0
        for n in range(_SERIES_TERMS):
            for k in range(_NK):
                acc[..., k] += p / (fact * (n + k + 1))
            p = p * z
            fact *= n + 1
        out[small] = acc
    big = ~small
    if np.any(big):
        th = theta[big]
        e = np.exp(-1j * th)
        m = (1.0 - e) / (1j * th)
        out[big, 0] = m
        for k in range(1, _NK):
            m = 1j * (e - k * m) / th
            out[big, k] = m
    return out


def filon_sum(x, coef, taus):
    """sum_i h_i exp(-i x_i tau) sum_k coef[i, k] M_k(h_i tau) for every tau."""
    x = np.asarray(x, dtype=float)
    coef = np.asarray(coef, dtype=complex)
    h = np.diff(x)
    x0 = x[:-1]
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    out = np.empty(taus.shape, dtype=complex)
    for j, tau in enumerate(taus):
        M = filon_moments(h * tau)
        local = np.einsum("ik,ik->i", coef, M)
        out[j] = np.sum(h * np.exp(-1j * x0 * tau) * local)
    return out


def filon_sum_uniform(x, coef, dtau, n):
    """filon_sum on tau = k dtau, k = 0..n, for each coefficient set in ``coef``."""
    taus = dtau * np.arange(n + 1)
    return np.array([filon_sum(x, c, taus) for c in np.asarray(coef)])


def _x_minus_log1p(x):
    """x - log(1 + x), accurate for small |x|."""
    out = x - np.log1p(x)
    small = np.abs(x) < 1e-2
    if np.any(small):
        xs = x[small]
        acc = np.zeros_like(xs)
        p = xs * xs
        for k in range(2, 10):
            acc += (1 if k % 2 == 0 else -1) * p / k
            p = p * xs
        out[small] = acc
    return out


def pv_linear(x, f, y):
    """Principal value of int f(t)/(t - y) dt for the piecewise-linear interpolant.

    Each interval not touching y contributes f_j L + m_j d_j phi(h_j/d_j) with
    d_j = x_j - y, L = log1p(h_j/d_j) and phi(s) = s - log1p(s); this avoids
    the cancellation between large slopes and logarithms near a threshold.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    h = np.diff(x)
    m = np.diff(f) / h
    out = np.empty(y.shape)
    for j, yv in enumerate(y):
        d = x[:-1] - yv
        e = x[1:] - yv
        left = e < 0
        right = d > 0
        far = (left & (e < 0)) | right
        far &= (d != 0) & (e != 0)
        acc = 0.0
        if np.any(far):
            s = h[far] / d[far]
            # near s = -1 (y just past a node) log1p(s) loses everything; e/d does not
            big = np.abs(s) >= 0.5
            L = np.log1p(s)
            L[big] = np.log(e[far][big] / d[far][big])
            phi = _x_minus_log1p(s)
            phi[big] = s[big] - L[big]
            acc += np.sum(f[:-1][far] * L + m[far] * d[far] * phi)
        # intervals that touch or contain y: log endpoint terms, ln 0 -> 0
        for i in np.nonzero(~far)[0]:
            g = f[i] - m[i] * d[i]
            la = np.log(abs(d[i])) if d[i] != 0 else 0.0
            lb = np.log(abs(e[i])) if e[i] != 0 else 0.0
            acc += g * (lb - la) + m[i] * h[i]
        out[j] = acc
    return out


def cauchy_sum(xq, wq, y, chunk=256):
    """sum_q wq[q] / (xq[q] - y[j]) for every j."""
    xq = np.asarray(xq, dtype=float)
    wq = np.asarray(wq, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty(y.shape)
    for s in range(0, y.size, chunk):
        out[s : s + chunk] = (wq[None, :] / (xq[None, :] - y[s : s + chunk, None])).sum(axis=1)
    return out


def volterra_march(W0, W1, W2, n):
    """March a_k = 1 - int_0^{tau_k} B(tau_k - s) a(s) ds for k = 1..n.

    ``W_m[k]`` are the moments step * int_0^1 t^m B((k + t) step) dt.  On each
    step a is the quadratic through three neighbouring nodes (the step and
    its left neighbour; the first step looks right instead), so the unknown
    a_k enters linearly and is solved for directly.  The first point uses
    linear interpolation.
    """
    W0 = np.asarray(W0, dtype=complex)
    W1 = np.asarray(W1, dtype=complex)
    W2 = np.asarray(W2, dtype=complex)
    # weights for nodes j+1, j, j-1 of step j, as functions of k = n-1-j
    cR = 0.5 * (2 * W0 - 3 * W1 + W2)
    cC = 2 * W1 - W2
    cL = 0.5 * (W2 - W1)
    # first step, nodes 0, 1, 2
    f0 = 0.5 * (W1 + W2)
    f1 = W0 - W2
    f2 = 0.5 * (W2 - W1)
    a = np.zeros(n + 1, dtype=complex)
    a[0] = 1.0
    if n >= 1:
        a[1] = (1.0 - a[0] * W1[0]) / (1.0 + W0[0] - W1[0])
    for k in range(2, n + 1):
        # steps j = 1..k-1 use nodes j-1, j, j+1 with index m = k-1-j
        acc = 1.0 - (a[0] * f0[k - 1] + a[1] * f1[k - 1])
        diag = 1.0 + cR[0]
        if k == 2:
            diag += f2[1]
        else:
            acc -= a[2] * f2[k - 1]
        # node j+1 for j = 1..k-2 -> a[2..k-1] with cR[k-1-j]
        acc -= np.dot(a[2:k], cR[k - 2 : 0 : -1])
        # node j for j = 1..k-1 -> a[1..k-1] with cC[k-1-j]
        acc -= np.dot(a[1:k], cC[k - 2 :: -1])
        # node j-1 for j = 1..k-1 -> a[0..k-2] with cL[k-1-j]
        acc -= np.dot(a[0 : k - 1], cL[k - 2 :: -1])
        a[k] = acc / diag
    return a
