"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting the environment
variable ``SQSDECAY_PURE_PYTHON=1`` forces the NumPy fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("SQSDECAY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def get_backend(name=None):
    """Return the kernel namespace for ``name`` ('cython' or 'python')."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def filon_sum(x, coef, taus):
    return _impl.filon_sum(
        np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(coef, dtype=complex), taus
    )


def filon_sum_uniform(x, coef, dtau, n, backend=None):
    """Filon sums on tau = k dtau for a stack of coefficient arrays (nf, N, 4)."""
    impl = _impl if backend is None else get_backend(backend)
    return impl.filon_sum_uniform(
        np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(coef, dtype=complex), float(dtau), int(n)
    )


def filon_moments(theta):
    return _impl.filon_moments(theta)


def pv_linear(x, f, y):
    return _impl.pv_linear(np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(f, dtype=float), y)


def cauchy_sum(xq, wq, y, backend=None):
    impl = _impl if backend is None else get_backend(backend)
    return impl.cauchy_sum(
        np.ascontiguousarray(xq, dtype=float), np.ascontiguousarray(wq, dtype=float), np.ascontiguousarray(y, dtype=float)
    )


def volterra_march(W0, W1, W2, n, backend=None):
    impl = _impl if backend is None else get_backend(backend)
    return impl.volterra_march(W0, W1, W2, int(n))


def cubic_coefficients(x, f):
    """Monomial coefficients of the local cubic on each interval.

    Interval i uses nodes i-1..i+2 (shifted inward at the ends) and the
    local variable t = (x - x_i)/h_i in [0, 1].  Returns shape (n-1, 4).
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f)
    n = x.size
    cplx = np.iscomplexobj(f)
    if n < 4:
        h = np.diff(x)
        c = np.zeros((n - 1, 4), dtype=complex if cplx else float)
        c[:, 0] = f[:-1]
        c[:, 1] = np.diff(f)
        return c
    i = np.arange(n - 1)
    start = np.clip(i - 1, 0, n - 4)
    idx = start[:, None] + np.arange(4)[None, :]
    h = x[1:] - x[:-1]
    t = (x[idx] - x[i][:, None]) / h[:, None]
    V = t[:, :, None] ** np.arange(4)[None, None, :]
    return np.linalg.solve(V, f[idx][..., None])[..., 0]
