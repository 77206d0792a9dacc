"""Spectral densities, the box denominator function and tabulation.

Both models share one mechanism.  Starting from the well solution
psi = sin(k x) (wall at the origin of the well), the pair (psi, psi') is
carried across the barrier with 2x2 transfer matrices.  At the start of
the free region, with asymptotic wavenumber k_out,

    alpha = k_out^2 psi^2 + psi'^2,        rho = 2 pi k_out W(k_in) / alpha,

where W(k) = sin^2 k / (k^2 - pi^2)^2 is the overlap factor of the initial
well state.  For the box model alpha is the familiar denominator written in
terms of q, r and s; it is a sum of squares on the real axis, so no
cancellation occurs between the well and barrier contributions.
"""
from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import ModelValidityError, NumericalError
from .model import BoxSystem, TrapezoidSystem
from .specfun import airy_basis

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# overlap factor


def overlap_factor(k):
    """sin^2 k / (k^2 - pi^2)^2, smooth through k = pi.

    Written as sinc(k - pi)^2 / (k + pi)^2, which is the same function with
    the removable singularity cancelled analytically.
    """
    k = np.asarray(k, dtype=float)
    d = k - math.pi
    # np.sinc(x) = sin(pi x)/(pi x)
    return np.sinc(d / math.pi) ** 2 / (k + math.pi) ** 2


# ---------------------------------------------------------------------------
# box model


@dataclass(frozen=True)
class ScaledValue:
    """A positive quantity stored as ``mantissa * exp(log_scale)``."""

    mantissa: float
    log_scale: float = 0.0

    @property
    def value(self) -> float:
        return self.mantissa * math.exp(self.log_scale)

    def __float__(self):
        return self.value


def _box_exit_state(sys: BoxSystem, eps):
    """psi(u), psi'(u) for psi = sin(r (x+1)) in the well; scaled by exp(-scale)."""
    eps = np.asarray(eps, dtype=float)
    u = sys.u
    r = np.sqrt(eps + sys.G0)
    p0 = np.sin(r)
    d0 = r * np.cos(r)
    d = sys.barrier_height - eps
    psi = np.empty_like(eps)
    dpsi = np.empty_like(eps)
    scale = np.zeros_like(eps)

    ev = d >= 0
    if np.any(ev):
        s = np.sqrt(d[ev])
        x = s * u
        # cosh x e^-x, sinh x e^-x and sinh(x)/s e^-x without overflow
        ch = 0.5 * (1.0 + np.exp(-2.0 * x))
        sh = -0.5 * np.expm1(-2.0 * x)
        with np.errstate(invalid="ignore", divide="ignore"):
            shs = np.where(x > 0, u * sh / np.where(x > 0, x, 1.0), u)
        psi[ev] = p0[ev] * ch + d0[ev] * shs
        dpsi[ev] = d0[ev] * ch + s * p0[ev] * sh
        scale[ev] = x
    pr = ~ev
    if np.any(pr):
        st = np.sqrt(-d[pr])
        x = st * u
        c, sn = np.cos(x), np.sin(x)
        sinc = u * np.sinc(x / math.pi)
        psi[pr] = p0[pr] * c + d0[pr] * sinc
        dpsi[pr] = d0[pr] * c - st * p0[pr] * sn
    return psi, dpsi, scale


def alpha_box(sys: BoxSystem, eps: float) -> ScaledValue:
    """Denominator function alpha(eps) in scaled form.

    Raises :class:`ModelValidityError` if the result is not positive, which
    for eps > 0 can only come from a numerical failure.
    """
    if eps < 0:
        raise ModelValidityError("alpha_box needs eps >= 0")
    psi, dpsi, x = _box_exit_state(sys, np.array([float(eps)]))
    m = eps * psi[0] ** 2 + dpsi[0] ** 2
    if not m > 0:
        raise ModelValidityError(f"alpha({eps}) = {m} is not positive")
    return ScaledValue(float(m), 2.0 * float(x[0]))


def alpha_box_array(sys: BoxSystem, eps) -> np.ndarray:
    """Unscaled alpha on an array of real energies (may overflow to inf)."""
    eps = np.asarray(eps, dtype=float)
    psi, dpsi, x = _box_exit_state(sys, eps)
    with np.errstate(over="ignore"):
        return (eps * psi**2 + dpsi**2) * np.exp(2.0 * x)


def alpha_box_complex(sys: BoxSystem, z: complex) -> complex:
    """alpha continued to complex energy.

    alpha depends on r and s only through even combinations, so any branch of
    the square roots gives the same value: the function is entire in z.
    """
    z = complex(z)
    u = sys.u
    r = cmath.sqrt(z + sys.G0)
    s = cmath.sqrt(sys.barrier_height - z)
    x = s * u
    ch = cmath.cosh(x)
    if abs(x) < 1e-6:
        shs = u * (1.0 + x * x / 6.0)
        ssh = s * s * u * (1.0 + x * x / 6.0)
    else:
        sh = cmath.sinh(x)
        shs = sh / s
        ssh = s * sh
    p0, d0 = cmath.sin(r), r * cmath.cos(r)
    psi = p0 * ch + d0 * shs
    dpsi = d0 * ch + ssh * p0
    return z * psi * psi + dpsi * dpsi


def alpha_box_reference(sys: BoxSystem, eps: float) -> float:
    """alpha in the q, r, s form (evanescent branch) or q, r, s~ form.

    Kept as an independent expression for testing the transfer-matrix route.
    """
    q2 = eps
    r = math.sqrt(eps + sys.G0)
    vb = sys.barrier_height
    u = sys.u
    sr, cr = math.sin(r), math.cos(r)
    if eps <= vb:
        s = math.sqrt(vb - eps)
        x = s * u
        shs = u if x == 0 else math.sinh(x) / s
        X = r * cr * shs + sr * math.cosh(x)
        # X - sin r without cancellation for small s u
        xm = r * cr * shs + 2.0 * sr * math.sinh(0.5 * x) ** 2
    else:
        st = math.sqrt(eps - vb)
        x = st * u
        sns = math.sin(x) / st
        X = r * cr * sns + sr * math.cos(x)
        xm = r * cr * sns - 2.0 * sr * math.sin(0.5 * x) ** 2
    return q2 + sys.G0 * cr * cr + vb * xm * (X + sr)


def rho_box(sys: BoxSystem, eps):
    """Spectral density of the box model at real energies (array or scalar)."""
    scalar = np.ndim(eps) == 0
    e = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(e < 0):
        raise ModelValidityError("rho_box needs eps >= 0")
    psi, dpsi, x = _box_exit_state(sys, e)
    m = e * psi**2 + dpsi**2
    q = np.sqrt(e)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        out = np.where(q > 0, TWO_PI * q * overlap_factor(np.sqrt(e + sys.G0)) * np.exp(-2.0 * x) / m, 0.0)
    if np.any(~np.isfinite(out)) or np.any(out < 0):
        raise NumericalError("rho_box produced a non-finite or negative value")
    return float(out[0]) if scalar else out


def threshold_coefficient_box(sys: BoxSystem) -> float:
    """Exact c in rho ~ c (eps - eps_th)^(1/2) for the box model.

    With alpha(0) > 0 this is 2 pi W(r0) / alpha(0).  For G0 = 0 both
    sin^2 r and alpha vanish at threshold and the limit is taken through
    alpha(eps)/eps.
    """
    r0 = math.sqrt(sys.G0)
    a0 = float(alpha_box_array(sys, np.array([0.0]))[0])
    if sys.G0 > 0 and a0 > 1e-12:
        return TWO_PI * float(overlap_factor(r0)) / a0
    # both numerator and alpha are O(eps): evaluate the ratio at small eps
    e = 1e-10
    return TWO_PI * float(overlap_factor(math.sqrt(e + sys.G0))) / (float(alpha_box_array(sys, np.array([e]))[0]))


def threshold_coefficient_short_form(sys: BoxSystem) -> float:
    """Near-threshold coefficient 1/(2 pi alpha(0)) from the r -> pi limit of W."""
    a0 = float(alpha_box_array(sys, np.array([0.0]))[0])
    if a0 <= 0:
        raise ModelValidityError("alpha(0) vanishes; short form undefined")
    return 1.0 / (TWO_PI * a0)


# ---------------------------------------------------------------------------
# trapezoid model


def _ramp_transfer(z0: float, z1: float, kappa: float):
    """Transfer matrix over a linear segment in the B_{+-1/3} basis.

    Returns (matrix, log_scale, condition) with the true matrix equal to
    ``matrix * exp(log_scale)``.
    """
    v0 = airy_basis(z0)
    v1 = airy_basis(z1)
    T1 = np.array([[v1.b_plus, v1.b_minus], [kappa * v1.db_plus, kappa * v1.db_minus]])
    T0 = np.array([[v0.b_plus, v0.b_minus], [kappa * v0.db_plus, kappa * v0.db_minus]])
    det = kappa * v0.scaled_wronskian
    inv = np.array([[T0[1, 1], -T0[0, 1]], [-T0[1, 0], T0[0, 0]]]) / det
    cond = np.abs(T0).sum() * np.abs(inv).sum()
    return T1 @ inv, v1.log_scale - v0.log_scale, cond


def _flat_transfer(k2sq: float, w: float):
    """Transfer over a flat segment where psi'' = k2sq * psi; scaled for k2sq > 0."""
    if k2sq > 0:
        k = math.sqrt(k2sq)
        x = k * w
        ch = 0.5 * (1.0 + math.exp(-2.0 * x))
        sh = -0.5 * math.expm1(-2.0 * x)
        return np.array([[ch, sh / k], [k * sh, ch]]), x
    if k2sq < 0:
        k = math.sqrt(-k2sq)
        x = k * w
        return np.array([[math.cos(x), math.sin(x) / k], [-k * math.sin(x), math.cos(x)]]), 0.0
    return np.array([[1.0, w], [0.0, 1.0]]), 0.0


def trapezoid_exit_state(sys: TrapezoidSystem, eps: float, max_cond: float = 1e12):
    """(psi, psi', log_scale) at x = d for psi = sin(k1 x) near the wall."""
    a, b, c, d = sys.pos_a, sys.pos_b, sys.pos_c, sys.pos_d
    k1 = math.sqrt(eps)
    v = np.array([math.sin(k1 * a), k1 * math.cos(k1 * a)])
    log_scale = 0.0
    L23 = sys.L ** (2.0 / 3.0)
    R23 = sys.R ** (2.0 / 3.0)
    za, zb = -eps / L23, (sys.h1 - eps) / L23
    zc, zd = (sys.h1 - eps) / R23, (sys.h2 - eps) / R23
    steps = (
        _ramp_transfer(za, zb, sys.L ** (1.0 / 3.0)),
        (*_flat_transfer(sys.h1 - eps, c - b), 1.0),
        _ramp_transfer(zc, zd, -sys.R ** (1.0 / 3.0)),
    )
    for M, ls, cond in steps:
        if cond > max_cond:
            raise NumericalError(f"transfer matrix near-singular at eps={eps} (cond ~ {cond:.3g})")
        v = M @ v
        n = abs(v).max()
        if n == 0:
            raise NumericalError("state vanished during transfer")
        v = v / n
        log_scale += ls + math.log(n)
    return float(v[0]), float(v[1]), log_scale


def alpha_trapezoid(sys: TrapezoidSystem, eps: float) -> ScaledValue:
    """k3^2 psi(d)^2 + psi'(d)^2, equal to 2 k3^2 (|e1|^2 + |e2|^2)."""
    if eps <= sys.h2:
        raise ModelValidityError("trapezoid spectral density needs eps > h2")
    psi, dpsi, ls = trapezoid_exit_state(sys, eps)
    k3sq = eps - sys.h2
    return ScaledValue(k3sq * psi * psi + dpsi * dpsi, 2.0 * ls)


def rho_trapezoid(sys: TrapezoidSystem, eps):
    """Spectral density of the trapezoid model; zero at and below threshold."""
    scalar = np.ndim(eps) == 0
    e = np.atleast_1d(np.asarray(eps, dtype=float))
    out = np.zeros_like(e)
    for i, x in enumerate(e):
        if x <= sys.h2:
            continue
        al = alpha_trapezoid(sys, float(x))
        k3 = math.sqrt(x - sys.h2)
        k1 = math.sqrt(x)
        # initial state sqrt(2/a) sin(pi x / a) on [0, a]
        w = float(overlap_factor(k1 * sys.pos_a)) * sys.pos_a
        out[i] = TWO_PI * k3 * w / al.mantissa * math.exp(-al.log_scale)
    return float(out[0]) if scalar else out


def trapezoid_quasi_levels(sys: TrapezoidSystem, n_scan: int = 4000) -> list[float]:
    """Energies in (h2, h1) where the solution stops growing across the plateau.

    These bracket the narrow well resonances; the density maximum lies close
    to (but not exactly at) each returned energy.
    """

    def growing(e):
        psi, dpsi, _ = _state_at_b(sys, e)
        k2 = math.sqrt(sys.h1 - e)
        return psi + dpsi / k2

    grid = np.linspace(sys.h2, sys.h1, n_scan + 1)[1:-1]
    vals = np.array([growing(e) for e in grid])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        roots.append(optimize.brentq(growing, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return roots


def _state_at_b(sys: TrapezoidSystem, eps: float):
    k1 = math.sqrt(eps)
    v = np.array([math.sin(k1 * sys.pos_a), k1 * math.cos(k1 * sys.pos_a)])
    L23 = sys.L ** (2.0 / 3.0)
    M, ls, _ = _ramp_transfer(-eps / L23, (sys.h1 - eps) / L23, sys.L ** (1.0 / 3.0))
    v = M @ v
    return float(v[0]), float(v[1]), ls


# ---------------------------------------------------------------------------
# model dispatch


def density_function(model) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(model, BoxSystem):
        return lambda e: rho_box(model, e)
    if isinstance(model, TrapezoidSystem):
        return lambda e: rho_trapezoid(model, e)
    raise TypeError(f"unsupported model {type(model).__name__}")


def resonance_profile(model) -> Callable[[np.ndarray], np.ndarray]:
    """k_out / alpha: rho with the overlap factor removed.

    Its maxima are the barrier resonances; the zeros of sin^2 in the
    overlap factor do not produce spurious maxima here.
    """
    if isinstance(model, BoxSystem):

        def prof(e):
            e = np.atleast_1d(np.asarray(e, dtype=float))
            psi, dpsi, x = _box_exit_state(model, e)
            m = e * psi**2 + dpsi**2
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(e > 0, np.sqrt(e) * np.exp(-2.0 * x) / m, 0.0)

        return prof
    if isinstance(model, TrapezoidSystem):

        def prof(e):
            e = np.atleast_1d(np.asarray(e, dtype=float))
            out = np.zeros_like(e)
            for i, x in enumerate(e):
                if x > model.h2:
                    al = alpha_trapezoid(model, float(x))
                    out[i] = math.sqrt(x - model.h2) / al.mantissa * math.exp(-al.log_scale)
            return out

        return prof
    raise TypeError(f"unsupported model {type(model).__name__}")


def model_tag(model) -> str:
    if isinstance(model, BoxSystem):
        return "box"
    if isinstance(model, TrapezoidSystem):
        return "trapezoid"
    return "external"


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class Peak:
    center: float
    width: float  # full width at half maximum
    height: float


@dataclass(frozen=True)
class SpectralTable:
    """Sampled spectral density with threshold metadata.

    ``integral`` is the integral of the piecewise-cubic interpolant over the
    grid; ``tail_estimate`` is the estimated weight above the last grid point.
    """

    eps_th: float
    grid: np.ndarray
    values: np.ndarray
    model_tag: str = "external"
    params: dict = field(default_factory=dict)
    peaks: tuple = ()
    integral: float = float("nan")
    tail_estimate: float = 0.0

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        v = np.array(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise ModelValidityError("grid and values must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(g) <= 0):
            raise ModelValidityError("grid must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ModelValidityError("spectral values must be finite and nonnegative")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if not math.isfinite(self.integral):
            from .dynamics import interpolant_integral

            object.__setattr__(self, "integral", interpolant_integral(g, v))

    @property
    def deficit(self) -> float:
        return 1.0 - self.integral

    def trapezoid_integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    @property
    def first_peak(self) -> Peak:
        if self.peaks:
            return self.peaks[0]
        i = int(np.argmax(self.values))
        return Peak(float(self.grid[i]), float("nan"), float(self.values[i]))

    def header(self) -> str:
        items = dict(self.params)
        items.setdefault("model", self.model_tag)
        items["eps_th"] = self.eps_th
        items["n_points"] = int(self.grid.size)
        items["tail_estimate"] = float(self.tail_estimate)
        return "# " + " ".join(f"{k}={_fmt(v)}" for k, v in items.items())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(self.header() + "\n")
        buf.write("epsilon,rho\n")
        for e, r in zip(self.grid, self.values):
            buf.write(f"{e:.17g},{r:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "SpectralTable":
        with open(path) as fh:
            lines = fh.read().splitlines()
        params = {}
        body = []
        for ln in lines:
            if ln.startswith("#"):
                for tok in ln[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        params[k] = _parse(v)
            elif ln.strip():
                body.append(ln)
        rows = list(csv.reader(body))
        if not rows or [c.strip() for c in rows[0]] != ["epsilon", "rho"]:
            raise ModelValidityError("table CSV must have header 'epsilon,rho'")
        try:
            data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        except ValueError as exc:
            raise ModelValidityError(f"malformed table row: {exc}") from None
        if data.size == 0:
            raise ModelValidityError("table CSV has no rows")
        tag = str(params.pop("model", "external"))
        eps_th = float(params.pop("eps_th", data[0, 0]))
        params.pop("n_points", None)
        tail = float(params.pop("tail_estimate", 0.0))
        return cls(eps_th, data[:, 0], data[:, 1], tag, params, tail_estimate=tail)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


# ---------------------------------------------------------------------------
# resonance location and adaptive grids


def _scalar(f):
    return lambda e: float(np.ravel(f(e))[0])


def _half_max_edge(f, peak: float, height: float, limit: float) -> float | None:
    """Point between ``peak`` and ``limit`` where f drops to height/2."""
    f = _scalar(f)
    target = 0.5 * height
    step = math.copysign(max(abs(peak) * 1e-15, 1e-300), limit - peak)
    x = peak
    while True:
        nxt = peak + step
        if (nxt - limit) * math.copysign(1.0, step) >= 0:
            nxt = limit
        if float(f(nxt)) <= target:
            return optimize.brentq(lambda e: float(f(e)) - target, min(x, nxt), max(x, nxt), xtol=1e-300, rtol=1e-15)
        if nxt == limit:
            return None
        x = nxt
        step *= 2.0


def _refine_peak(f, lo: float, hi: float, eps_th: float) -> Peak | None:
    bracket = (lo, hi)
    # zoom scan: robust for peaks far narrower than the bracket
    for _ in range(60):
        xs = np.linspace(lo, hi, 101)
        k = int(np.argmax(f(xs)))
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, 100)]
        if hi - lo <= 4e-16 * max(abs(lo), abs(hi), 1e-300):
            break
    c = float(xs[k])
    h = _scalar(f)(c)
    if h <= 0:
        return None
    lo, hi = bracket
    left = _half_max_edge(f, c, h, eps_th)
    right = _half_max_edge(f, c, h, 2.0 * c - eps_th + 10.0 * (hi - lo))
    if left is None and right is None:
        return None
    if left is None:
        w = 2 * (right - c)
    elif right is None:
        w = 2 * (c - left)
    else:
        w = right - left
    return Peak(c, w, h)


def find_peaks(model, eps_max: float, n_scan: int = 3000) -> list[Peak]:
    """Locate resonances below ``eps_max`` with their half-maximum widths.

    Maxima of :func:`resonance_profile` are found on a coarse scan (plus the
    quasi-level hints for the trapezoid) and refined by bounded search.
    """
    f = resonance_profile(model)
    rho = density_function(model)
    eps_th = model.eps_th
    span = eps_max - eps_th
    scan = eps_th + np.unique(
        np.concatenate([np.geomspace(1e-10 * max(1.0, span), span, n_scan), np.linspace(0, span, n_scan)[1:]])
    )
    vals = f(scan)
    cand = [(scan[i - 1], scan[i + 1]) for i in range(1, len(scan) - 1) if vals[i] > vals[i - 1] and vals[i] >= vals[i + 1]]
    if isinstance(model, TrapezoidSystem):
        for e in trapezoid_quasi_levels(model):
            d = 1e-3 * max(1.0, e / 10.0)
            cand.append((max(e - d, eps_th + 1e-12), e + d))
    peaks: list[Peak] = []
    for lo, hi in cand:
        p = _refine_peak(f, lo, hi, eps_th)
        if p is None or not math.isfinite(p.width) or p.width <= 0:
            continue
        if any(abs(p.center - q.center) < 0.5 * max(p.width, q.width) for q in peaks):
            continue
        peaks.append(Peak(p.center, p.width, float(rho(p.center))))
    peaks.sort(key=lambda p: p.center)
    return peaks


def spacing_function(eps_th: float, peaks: Sequence[Peak], n_base: int, osc_shift: float = 0.0):
    """Local grid spacing h(eps) as the minimum over feature-driven limits."""
    f = 2000.0 / n_base
    g = 0.05 * f
    g_pk = 0.015 * f
    h_min = 1e-13
    c_osc = 0.3 * f

    def h(e: float) -> float:
        x = e - eps_th
        val = max(h_min, g * x)
        val = min(val, c_osc * math.sqrt(e + osc_shift + 1.0))
        for p in peaks:
            val = min(val, max(p.width * f / 80.0, g_pk * abs(e - p.center)))
        return val

    return h


def march_grid(h, start: float, stop: float) -> np.ndarray:
    pts = [start]
    e = start
    while True:
        step = h(e)
        nxt = e + step
        if nxt >= stop - 0.5 * step:
            break
        pts.append(nxt)
        e = nxt
    pts.append(stop)
    return np.array(pts)


def _tail_estimate(grid: np.ndarray, values: np.ndarray, power: float = 2.5) -> float:
    """Weight above grid[-1] assuming an eps^-power envelope fitted on the last 10%."""
    e_max = grid[-1]
    sel = grid >= 0.9 * e_max
    if sel.sum() < 3:
        return 0.0
    mean = np.trapezoid(values[sel], grid[sel]) / (grid[sel][-1] - grid[sel][0])
    e_mid = 0.5 * (grid[sel][0] + grid[sel][-1])
    amp = mean * e_mid**power
    return float(amp * e_max ** (1.0 - power) / (power - 1.0))


def build_table(model, eps_max: float = 4000.0, n_base: int = 2000, max_deficit: float = 1e-2) -> SpectralTable:
    """Tabulate rho on an adaptive grid.

    The grid is dense geometrically toward threshold, resolves each peak to a
    small fraction of its width and follows the sin^2 oscillation in the
    tail.  Raises :class:`NumericalError` if more than ``max_deficit`` of the
    weight is missing.
    """
    eps_th = model.eps_th
    if eps_max <= eps_th:
        raise ModelValidityError("eps_max must exceed the threshold")
    if n_base < 50:
        raise ModelValidityError("n_base too small")
    peaks = find_peaks(model, eps_max)
    for p in peaks[:1]:
        if eps_max < p.center + 100 * p.width:
            raise ModelValidityError(
                f"eps_max={eps_max} is within 100 widths of the resonance at {p.center:.6g}"
            )
    shift = model.G0 if isinstance(model, BoxSystem) else 0.0
    h = spacing_function(eps_th, peaks, n_base, shift)
    grid = march_grid(h, eps_th, eps_max)
    values = density_function(model)(grid)
    tail = _tail_estimate(grid, values)
    table = SpectralTable(eps_th, grid, values, model_tag(model), model.params(), tuple(peaks), tail_estimate=tail)
    if table.deficit > max_deficit:
        raise NumericalError(
            f"table misses {table.deficit:.3g} of the normalization; increase eps_max"
        )
    return table


def threshold_fit(table: SpectralTable, window: float | None = None, min_points: int = 50):
    """Fit rho ~ c (eps - eps_th)^p near threshold; return (p, c).

    The default window extends 1e-3 of the distance to the first peak.
    """
    x = table.grid - table.eps_th
    if window is None:
        window = 1e-3 * (table.first_peak.center - table.eps_th)
    sel = (x > 0) & (x <= window)
    if sel.sum() < min_points:
        raise NumericalError(f"only {int(sel.sum())} points inside the threshold window")
    v = table.values[sel]
    if np.any(v <= 0):
        raise NumericalError("spectral density vanishes inside the threshold window")
    p, lc = np.polyfit(np.log(x[sel]), np.log(v), 1)
    return float(p), float(math.exp(lc))
