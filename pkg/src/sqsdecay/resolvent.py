"""Resolvent quantities: Hilbert transforms, coupling density and poles.

Conventions: F(z) = int rho(e)/(e - z) de on the first sheet, so that
F(eps + i0) = PV int rho/(e - eps) + i pi rho(eps), and
1/F(z) = eps0 - z - G(z) with G the Cauchy transform of the coupling
density sigma = rho/|F|^2.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ModelValidityError, NumericalError
from .model import BoxSystem, bare_level
from .spectral import alpha_box_complex

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ComplexPole:
    """Second-sheet pole z_p.

    ``residual`` is the relative size of alpha(z_p) for the exact box pole and NaN for the
    first-order estimate.
    """

    z: complex
    method: str
    residual: float = float("nan")

    def __post_init__(self):
        if self.method not in ("first_order", "exact_box"):
            raise ValueError(f"unknown pole method {self.method!r}")
        if not self.z.imag < 0:
            raise NumericalError(f"pole {self.z} is not in the lower half plane")

    @property
    def gamma(self) -> float:
        """Exponential width -2 Im z_p."""
        return -2.0 * self.z.imag


@dataclass(frozen=True)
class CouplingDensity:
    grid: np.ndarray
    values: np.ndarray
    eps_th: float
    flagged: tuple = ()

    def __call__(self, eps):
        return np.interp(eps, self.grid, self.values)


def _check_inside(grid, eps):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    outside = (eps < grid[1]) | (eps > grid[-2])
    if np.any(outside):
        bad = eps[outside]
        raise ModelValidityError(
            f"principal value requested within one grid cell of an endpoint (eps={bad[0]:.6g})"
        )
    return eps


def pv_integral(grid, values, eps):
    """PV int f(e)/(e - eps) de for the piecewise-linear interpolant of f.

    Equivalent to subtracting f(eps) and adding
    f(eps) ln|(e_max - eps)/(eps - e_min)|, done in closed form per interval.
    """
    grid = np.asarray(grid, dtype=float)
    scalar = np.ndim(eps) == 0
    e = _check_inside(grid, eps)
    out = kernels.pv_linear(grid, np.asarray(values, dtype=float), e)
    return float(out[0]) if scalar else out


def boundary_value_F(table, eps):
    """F(eps + i0) from the tabulated density."""
    scalar = np.ndim(eps) == 0
    e = np.atleast_1d(np.asarray(eps, dtype=float))
    re = pv_integral(table.grid, table.values, e)
    im = math.pi * np.interp(e, table.grid, table.values)
    out = np.asarray(re) + 1j * im
    return complex(out[0]) if scalar else out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def cubic_pv_correction(grid, values, backend=None):
    """PV of (cubic interpolant - linear interpolant)/(e - x_i) at every node x_i.

    The difference of the two interpolants vanishes at each node, so the
    integrand is regular there and plain Gauss-Legendre panels suffice.
    Adding this to the piecewise-linear principal value gives the principal
    value of the same cubic interpolant used by the quadrature and moments.
    """
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    c = kernels.cubic_coefficients(g, v)
    h = np.diff(g)
    t = 0.5 * (_GL_NODES + 1.0)
    cub = c[:, 0:1] + t * (c[:, 1:2] + t * (c[:, 2:3] + t * c[:, 3:4]))
    lin = v[:-1, None] + t * np.diff(v)[:, None]
    xq = g[:-1, None] + h[:, None] * t
    wq = 0.5 * h[:, None] * _GL_WEIGHTS * np.real(cub - lin)
    return kernels.cauchy_sum(xq.ravel(), wq.ravel(), g, backend)


def _F_on_nodes(table):
    g = np.asarray(table.grid, dtype=float)
    v = np.asarray(table.values, dtype=float)
    F = np.empty(g.size, dtype=complex)
    re = kernels.pv_linear(g, v, g[1:-1]) + cubic_pv_correction(g, v)[1:-1]
    F[1:-1] = re + 1j * math.pi * v[1:-1]
    # endpoints: the log singularity of a truncated table is not physical
    F[0] = F[1]
    F[-1] = F[-2]
    return F


def sigma_from_rho(table, floor: float = 1e-12) -> CouplingDensity:
    """sigma = rho / |F(eps + i0)|^2 on every grid node.

    At the two endpoints the principal value diverges for a truncated table;
    there |F| is taken from the neighbouring node.
    """
    F = _F_on_nodes(table)
    absF = np.abs(F)
    flagged = tuple(int(i) for i in np.nonzero(absF < floor)[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        sig = np.where(absF >= floor, np.asarray(table.values) / absF**2, 0.0)
    return CouplingDensity(np.asarray(table.grid), sig, table.eps_th, flagged)


def rho_from_sigma(sigma: CouplingDensity, eps0: float):
    """Spectral density sigma / ((eps0 - eps - Pi)^2 + (pi sigma)^2) on the sigma grid.

    Pi uses the same cubic-consistent principal value as :func:`sigma_from_rho`,
    so the two are inverse to quadrature accuracy.  Endpoint values take Pi
    from the neighbouring node.
    """
    g = np.asarray(sigma.grid, dtype=float)
    v = np.asarray(sigma.values, dtype=float)
    Pi = np.empty(g.size)
    Pi[1:-1] = kernels.pv_linear(g, v, g[1:-1]) + cubic_pv_correction(g, v)[1:-1]
    Pi[0], Pi[-1] = Pi[1], Pi[-2]
    d = eps0 - g - Pi
    return v / (d * d + (math.pi * v) ** 2)


def level_shift_Pi(sigma: CouplingDensity, eps):
    return pv_integral(sigma.grid, sigma.values, eps)


def golden_rule_width(sigma: CouplingDensity, eps0: float) -> float:
    return TWO_PI * float(sigma(eps0))


def pole_first_order(sigma: CouplingDensity, eps0: float) -> ComplexPole:
    """z_p ~ eps0 - Pi(eps0) - i pi sigma(eps0)."""
    z = complex(eps0 - level_shift_Pi(sigma, eps0), -math.pi * float(sigma(eps0)))
    return ComplexPole(z, "first_order")


def threshold_prefactor(Q: float, Pi_th: float) -> float:
    """|F(eps_th)|^2 = (Q - Pi(eps_th))^-2."""
    d = Q - Pi_th
    if abs(d) < 1e-12 * max(1.0, abs(Q), abs(Pi_th)):
        raise ModelValidityError("SQS regime: prefactor undefined/huge (Q equals Pi at threshold)")
    return 1.0 / (d * d)


def first_moment(table) -> float:
    """Mean energy of the tabulated density (the eps0 consistent with the table)."""
    from .dynamics import interpolant_integral

    g = np.asarray(table.grid)
    v = np.asarray(table.values)
    return interpolant_integral(g, g * v) / interpolant_integral(g, v)


# ---------------------------------------------------------------------------
# exact pole of the box model


def _tanh_terms(s, u):
    """tanh(su), tanh(su)/s and d(tanh(su)/s)/ds, with a series at small su."""
    x = s * u
    if abs(x) < 1e-3:
        x2 = x * x
        tau = u * (1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0)
        return x * tau / u, tau, u * u * x * (-2.0 / 3.0 + 8.0 * x2 / 15.0)
    t = cmath.tanh(x)
    tau = t / s
    return t, tau, (u * (1.0 - t * t) - tau) / s


def outgoing_function(sys: BoxSystem, q: complex):
    """Matching function for an outgoing wave and its q derivative.

    The wave exp(i q x) beyond the barrier is carried back to x = 0 and
    matched to sin(r (x + 1)); the common factor cosh(s u) is divided out so
    that no exponentially large terms cancel.  The zeros with Re q > 0 and
    Im q < 0 are the resonance poles z = q^2; they are simple zeros even
    when alpha(z) = |.|^2-like has a nearly double zero close to the axis.
    """
    u = sys.u
    z = q * q
    r = cmath.sqrt(z + sys.G0)
    s = cmath.sqrt(sys.barrier_height - z)
    t, tau, dtau = _tanh_terms(s, u)
    sr, cr = cmath.sin(r), cmath.cos(r)
    R = r * cr
    A = -s * t + 1j * q  # psi'(0) / cosh
    B = 1.0 - 1j * q * tau  # psi(0) / cosh
    h = A * sr - B * R
    dr = q / r if r != 0 else 0.0
    ds = -q / s if s != 0 else 0.0
    dA = -(t + s * u * (1.0 - t * t)) * ds + 1j
    dB = -1j * tau - 1j * q * dtau * ds
    dh = dA * sr + A * cr * dr - dB * R - B * (cr - r * sr) * dr
    return h, dh


def _newton(sys, z, max_iter=100, tol=1e-14):
    """Newton iteration on f(q) started from energy ``z``; returns (z, iterations)."""
    q = cmath.sqrt(complex(z))
    if q.real < 0:
        q = -q
    last = (math.inf, math.inf)
    for it in range(max_iter):
        f, d = outgoing_function(sys, q)
        if d == 0 or not cmath.isfinite(d):
            raise NumericalError("vanishing derivative in Newton iteration")
        dq = f / d
        lim = 0.25 * max(abs(q), 1e-3)
        if abs(dq) > lim:
            dq *= lim / abs(dq)
        q = q - dq
        # real and imaginary parts are judged separately: near the closed-well
        # limit Im q is many orders below Re q
        done = True
        for c, dc, prev in ((q.real, dq.real, last[0]), (q.imag, dq.imag, last[1])):
            if abs(dc) <= tol * abs(c) or abs(dc) < 1e-300:
                continue
            if abs(dc) < 1e-10 * abs(q) and abs(dc) > 0.5 * prev:
                continue  # stagnated at roundoff
            done = False
        if done:
            return q * q, it + 1
        last = (abs(dq.real), abs(dq.imag))
    raise NumericalError(f"Newton iteration did not converge in {max_iter} steps (last z={q * q})")


def pole_residual(sys, z) -> float:
    """|h| at q = sqrt(z), relative to the size of its terms."""
    q = cmath.sqrt(complex(z))
    u = sys.u
    r = cmath.sqrt(q * q + sys.G0)
    s = cmath.sqrt(sys.barrier_height - q * q)
    t, tau, _ = _tanh_terms(s, u)
    h, _ = outgoing_function(sys, q)
    size = abs(s * t * cmath.sin(r)) + abs(q * cmath.sin(r)) + abs(r * cmath.cos(r)) * (1 + abs(q * tau))
    return abs(h) / size


def _finish(sys, z) -> ComplexPole:
    # f has no zeros on the positive real axis (|f|^2 = alpha > 0 there), so a
    # real zero can only be a virtual state with q on the imaginary axis
    if z.real < 0 and abs(z.imag) <= 1e-10 * abs(z):
        raise NumericalError(
            f"alpha has a real zero at {z.real:.10g} (virtual state); "
            "no complex resonance pole"
        )
    if not z.imag < 0:
        raise NumericalError(f"Newton converged to {z}, which is not a decaying resonance")
    res = pole_residual(sys, z)
    if not res < 1e-10:
        raise NumericalError(f"pole residual {res:.3g} above 1e-10")
    return ComplexPole(z, "exact_box", res)


def pole_exact_box(sys: BoxSystem, seed: complex | None = None, sigma: CouplingDensity | None = None, G_start: float = 1e4, n_steps: int = 60) -> ComplexPole:
    """Complex zero of alpha(z) in the lower half plane.

    With an explicit ``seed`` a plain Newton iteration is run.  Otherwise
    the pole is followed by continuation in G from ``G_start`` (an almost
    impenetrable barrier, where it sits just below eps0 = pi^2 - G0) down to
    ``sys.G``; this selects the resonance belonging to the initial well
    level rather than any other zero of alpha.
    """
    e0 = bare_level(sys)
    if e0 <= 0:
        raise ModelValidityError("bare level is not above threshold; no resonance")
    if seed is not None:
        seed = complex(seed)
        if seed.imag > 0:
            # the upper zero is the conjugate partner; reflect the seed
            seed = seed.conjugate()
        z, _ = _newton(sys, seed)
        return _finish(sys, z)
    if sigma is not None:
        z, _ = _newton(sys, complex(e0, -0.5 * golden_rule_width(sigma, e0)))
        return _finish(sys, z)
    if sys.G >= G_start:
        z, _ = _newton(sys, complex(e0, -0.01))
        return _finish(sys, z)
    z, _ = _newton(BoxSystem(G_start, sys.G0, sys.u), complex(e0, -0.01))
    logG, target = math.log(G_start), math.log(sys.G)
    step0 = (target - logG) / n_steps
    step, prev, prev_step = step0, None, None
    while logG > target:
        dl = max(step, target - logG)
        s = BoxSystem(math.exp(logG + dl) if logG + dl > target else sys.G, sys.G0, sys.u)
        guess = z if prev is None else z + (z - prev) * (dl / prev_step)
        try:
            znew, _ = _newton(s, guess, max_iter=30)
            ok = abs(znew - z) <= 0.3 * max(abs(z.imag), 0.01 * abs(z.real), 1e-9)
        except NumericalError:
            ok = False
        if not ok:
            step *= 0.5
            if abs(step) < 1e-9:
                raise NumericalError(
                    f"pole continuation stalled at G={math.exp(logG):.8g} (z={z:.8g}); "
                    "the resonance pair is merging onto the real axis"
                )
            continue
        prev, prev_step, z = z, dl, znew
        logG += dl
        step = max(step * 1.5, step0) if step0 < 0 else step
        if s.G == sys.G:
            break
    return _finish(sys, z)
