"""Survival amplitude, decay rate and related time-domain observables.

The amplitude is a(tau) = int rho(eps) exp(-i eps tau) d eps over the table
range.  Each grid interval carries a local cubic through four neighbouring
nodes; the cubic is integrated against the exponential exactly, so the cost
and accuracy do not depend on tau.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ModelValidityError, NumericalError

FLAG_THRESHOLD = 1e-6


def interpolant_integral(grid, values) -> float:
    """Integral of the piecewise-cubic interpolant used by the quadrature."""
    c = kernels.cubic_coefficients(grid, values)
    h = np.diff(np.asarray(grid, dtype=float))
    return float(np.real(np.sum(h * (c @ (1.0 / np.arange(1, 5))))))


def oscillatory_integral(grid, values, taus, backend=None):
    """int f(eps) exp(-i eps tau) d eps for each tau, piecewise-cubic Filon rule."""
    coef = kernels.cubic_coefficients(grid, values)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    n = taus.size - 1
    if n >= 8 and taus[0] == 0.0:
        dt = taus[-1] / n
        if np.array_equal(taus, dt * np.arange(n + 1)):
            # uniform grid from zero: phases by recurrence
            return kernels.filon_sum_uniform(grid, coef[None], dt, n, backend)[0]
    impl = kernels.get_backend(backend)
    return impl.filon_sum(
        np.ascontiguousarray(grid, dtype=float), np.ascontiguousarray(coef, dtype=complex), taus
    )


def _coarse(grid, values):
    idx = np.arange(0, len(grid), 2)
    if idx[-1] != len(grid) - 1:
        idx = np.append(idx, len(grid) - 1)
    return grid[idx], values[idx]


def amplitudes(table, taus, backend=None):
    """a(tau) and an error estimate for an array of times.

    The estimate combines the difference against the same rule on every
    other node, scaled for a fourth-order method, with the table's tail
    weight as a bound on the truncated part of the spectrum.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus < 0):
        raise ModelValidityError("times must be nonnegative")
    fine = oscillatory_integral(table.grid, table.values, taus, backend)
    cg, cv = _coarse(table.grid, table.values)
    coarse = oscillatory_integral(cg, cv, taus, backend)
    err = np.abs(fine - coarse) / 15.0 + abs(getattr(table, "tail_estimate", 0.0))
    return fine, err


def amplitude(table, tau: float, backend=None):
    """Survival amplitude at one time; returns ``(a, error_estimate)``."""
    a, e = amplitudes(table, [tau], backend)
    return complex(a[0]), float(e[0])


@dataclass
class DecayRecord:
    """Time series of the survival amplitude and derived quantities.

    ``rate`` holds NaN where the decay rate is undefined.
    """

    times: np.ndarray
    amplitude: np.ndarray
    quadrature_error: np.ndarray
    rate: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def survival(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    @property
    def flagged(self) -> bool:
        return bool(np.any(self.quadrature_error > FLAG_THRESHOLD))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        head = (f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params.items())
        buf.write("# " + " ".join(head) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "re_a", "im_a", "P", "Gamma", "err"])
        rate = self.rate if self.rate is not None else np.full(len(self.times), np.nan)
        for t, a, p, g, e in zip(self.times, self.amplitude, self.survival, rate, self.quadrature_error):
            w.writerow(
                [f"{t:.17g}", f"{a.real:.17g}", f"{a.imag:.17g}", f"{p:.17g}", "" if not np.isfinite(g) else f"{g:.17g}", f"{e:.17g}"]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def survival_series(table, taus, backend=None) -> DecayRecord:
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or np.any(np.diff(taus) <= 0):
        raise ModelValidityError("time grid must be strictly increasing")
    a, err = amplitudes(table, taus, backend)
    params = dict(getattr(table, "params", {}))
    return DecayRecord(taus, a, err, None, params)


def decay_rate_series(record: DecayRecord, window: float = 5.0) -> DecayRecord:
    """Gamma = -d ln P / d tau, boxcar-averaged over ``window`` time units.

    The series is cut at the first time where P drops to 1e-300 or below;
    later entries are NaN.
    """
    t = np.asarray(record.times, dtype=float)
    P = record.survival
    bad = np.nonzero(P <= 1e-300)[0]
    n = bad[0] if bad.size else t.size
    rate = np.full(t.size, np.nan)
    if n >= 3:
        g = -np.gradient(np.log(P[:n]), t[:n])
        if window > 0:
            dt = np.median(np.diff(t[:n]))
            if window / dt + 1 < 5:
                raise ModelValidityError("fewer than 5 samples per averaging window")
            cs = np.concatenate([[0.0], np.cumsum(g)])
            lo = np.searchsorted(t[:n], t[:n] - 0.5 * window - 1e-12 * window, side="left")
            hi = np.searchsorted(t[:n], t[:n] + 0.5 * window + 1e-12 * window, side="right")
            g = (cs[hi] - cs[lo]) / (hi - lo)
        rate[:n] = g
    params = dict(record.params, window=window)
    return replace(record, rate=rate, params=params)


def plateau_statistics(record: DecayRecord, t0: float, t1: float):
    """(mean, std/mean, (max-min)/mean) of the rate over [t0, t1]."""
    sel = (record.times >= t0) & (record.times <= t1) & np.isfinite(record.rate)
    g = record.rate[sel]
    if g.size < 2:
        raise NumericalError("rate undefined over the requested window")
    m = float(np.mean(g))
    return m, float(np.std(g) / m), float((g.max() - g.min()) / m)


def energy_moments(table, eps_cut: float | None = None):
    """(m0, m1, m2) of the interpolant restricted to eps <= eps_cut."""
    g = np.asarray(table.grid)
    v = np.asarray(table.values)
    if eps_cut is not None:
        if eps_cut > g[-1] * (1 + 1e-12):
            raise ModelValidityError("cutoff beyond the table")
        k = np.searchsorted(g, eps_cut, side="right")
        g, v = g[:k], v[:k]
    return tuple(interpolant_integral(g, v * g**p) for p in range(3))


def short_time_coefficient(table, eps_cut: float) -> float:
    """Energy variance with an explicit upper cutoff.

    Uses the normalized distribution below the cutoff.
    """
    m0, m1, m2 = energy_moments(table, eps_cut)
    return m2 / m0 - (m1 / m0) ** 2


def short_time_ratio(table, tau: float, eps_cut: float | None = None) -> float:
    """(1 - P(tau)/P(0)) / (Var tau^2), close to one for small tau."""
    var = short_time_coefficient(table, eps_cut if eps_cut is not None else float(table.grid[-1]))
    a, _ = amplitudes(table, [0.0, tau])
    P = np.abs(a) ** 2
    return float((1.0 - P[1] / P[0]) / (var * tau * tau))


@dataclass(frozen=True)
class TailFit:
    exponent: float
    flagged: bool
    slope_spread: float


def tail_fit(record: DecayRecord, tau_min: float, tau_max: float | None = None, floor: float = 1e-300) -> TailFit:
    """Least-squares slope of log P against log tau beyond ``tau_min``.

    ``flagged`` is set when local slopes scatter by more than 0.5, which
    indicates pole/threshold interference rather than a clean power law.
    """
    t = record.times
    P = record.survival
    tau_max = t[-1] if tau_max is None else tau_max
    if tau_max < 10 * tau_min:
        raise ModelValidityError("record must extend a decade beyond tau_min")
    sel = (t >= tau_min) & (t <= tau_max) & (P > floor)
    if sel.sum() < 5:
        raise NumericalError("too few points above the floor for a tail fit")
    lt, lp = np.log(t[sel]), np.log(P[sel])
    slope = float(np.polyfit(lt, lp, 1)[0])
    local = np.diff(lp) / np.diff(lt)
    spread = float(np.std(local))
    return TailFit(slope, spread > 0.5, spread)


def pole_background_decomposition(table, z_p, taus):
    """Split a(tau) into exp(-i z_p tau) and the remainder."""
    z = complex(getattr(z_p, "z", z_p))
    taus = np.asarray(taus, dtype=float)
    a, _ = amplitudes(table, taus)
    pole = np.exp(-1j * z * taus)
    return pole, a - pole


# ---------------------------------------------------------------------------
# Volterra route


def volterra_kernel_moments(grid, sigma, eps0: float, step: float, n: int, backend=None):
    """V_m[k] = step * int_0^1 t^m beta((k + t) step) dt for m = 0..3 and k = 0..n.

    beta(tau) = int sigma(eps) exp(-i (eps - eps0) tau) d eps.  Each V_m is a
    Filon integral of sigma(eps) M_m((eps - eps0) step) at tau = k step.
    """
    grid = np.asarray(grid, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    M = kernels.get_backend(backend).filon_moments((grid - eps0) * step)
    coef = np.stack([kernels.cubic_coefficients(grid, sigma * M[:, m]) for m in range(4)])
    phase = np.exp(1j * eps0 * step * np.arange(n + 1))
    return step * phase * kernels.filon_sum_uniform(grid, coef, step, n, backend)


def _refine_panels(grid, values, max_width):
    """Split panels wider than ``max_width`` using the cubic interpolant of ``values``.

    The kernel moments interpolate sigma(eps) M_m((eps - eps0) step), which
    oscillates with period 2 pi/step in eps; wide panels alias it.  A width
    of 0.1/step keeps about 60 nodes per period.
    """
    h = np.diff(grid)
    parts = np.maximum(1, np.ceil(h / max_width).astype(int))
    if np.all(parts == 1):
        return grid, values
    c = kernels.cubic_coefficients(grid, values)
    gs, vs = [], []
    for i in np.nonzero(parts > 1)[0]:
        t = np.arange(1, parts[i]) / parts[i]
        gs.append(grid[i] + h[i] * t)
        vs.append(c[i, 0] + t * (c[i, 1] + t * (c[i, 2] + t * c[i, 3])))
    g = np.concatenate([grid] + gs)
    v = np.concatenate([values] + vs)
    order = np.argsort(g, kind="stable")
    return g[order], v[order]


def integrated_kernel_moments(V, step: float):
    """W_m[k] = step * int_0^1 t^m B((k + t) step) dt, with B(t) = int_0^t beta.

    Splitting int_0^{(k+t) step} at whole steps gives
    W_m[k] = step/(m+1) * (sum_{j<=k} V_0[j] - V_{m+1}[k]).
    """
    c = np.cumsum(V[0])
    return [step / (m + 1) * (c - V[m + 1]) for m in (0, 1, 2)]


def _volterra_once(grid, sigma, eps0, tau_max, step, backend):
    n = int(round(tau_max / step))
    if n < 1:
        raise ModelValidityError("tau_max must exceed the step")
    V = volterra_kernel_moments(grid, sigma, eps0, step, n, backend)
    W = integrated_kernel_moments(V, step)
    A = kernels.volterra_march(*W, n, backend=backend)
    taus = step * np.arange(n + 1)
    return taus, A * np.exp(-1j * eps0 * taus)


def volterra_evolve(sigma_table, eps0: float, tau_max: float, step: float = 0.02, check: bool = True, tol: float = 1e-4, backend=None) -> DecayRecord:
    """Integrate a' = -int_0^tau beta(tau - s) a(s) ds with a(0) = 1.

    The equation is used in its time-integrated form
    a(tau) = 1 - int_0^tau B(tau - s) a(s) ds, whose kernel B is bounded even
    though beta is not (sigma decays only like eps^-1/2).  Product
    integration: a is a local quadratic on each step and B is integrated
    exactly against it.  The returned amplitude is in the plain
    exp(-i eps tau) phase convention.  With ``check`` the run is repeated at
    half the step and a discrepancy above ``tol`` raises NumericalError.
    """
    # one refined grid for both step sizes, fine enough for the smaller one
    grid, sigma = _refine_panels(
        np.asarray(sigma_table.grid, dtype=float), np.asarray(sigma_table.values, dtype=float), 0.1 / step
    )
    taus, a = _volterra_once(grid, sigma, eps0, tau_max, step, backend)
    err = np.zeros(taus.size)
    if check:
        _, a2 = _volterra_once(grid, sigma, eps0, tau_max, 0.5 * step, backend)
        diff = np.abs(a2[::2][: taus.size] - a)
        if diff.max() > tol:
            raise NumericalError(
                f"Volterra step halving changes a(tau) by {diff.max():.3g} > {tol:g}"
            )
        err = diff
    return DecayRecord(taus, a, err, None, {"method": "volterra", "eps0": eps0, "step": step})
