"""SQS criteria, Q -> G0 inversion and (G, Q) sweeps, plus file writers.

Q is measured from the pole: Q = Re z_p - eps_th.  The exact criterion is
|Im z_p| / Q >= 1; the practical one compares the golden-rule width with
the distance of the level from threshold, Gamma_p / (eps0 - eps_th) >= 2.
"""
from __future__ import annotations

import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ModelValidityError, NumericalError
from .model import PI2, BoxSystem, bare_level
from .resolvent import ComplexPole, golden_rule_width, pole_exact_box, sigma_from_rho
from .spectral import build_table

DEFAULT_G = (5.0, 50.0, 20)
DEFAULT_Q = (1e-4, 10.0, 20)


def format_header(params: dict) -> str:
    """One comment line holding every parameter, in insertion order."""
    def fmt(v):
        if isinstance(v, float):
            return repr(v)  # shortest text that round-trips
        return str(v).replace(" ", "_")

    return "# " + " ".join(f"{k}={fmt(v)}" for k, v in params.items())


# ---------------------------------------------------------------------------
# criteria


def sqs_criterion(pole: ComplexPole, eps_th: float = 0.0) -> float:
    """|Im z_p| / (Re z_p - eps_th); the decay is of SQS type when this is >= 1."""
    Q = pole.z.real - eps_th
    if not Q > 0:
        raise ModelValidityError(
            f"resonance below threshold (Re z_p - eps_th = {Q:.6g}); criterion undefined"
        )
    return abs(pole.z.imag) / Q


def sqs_criterion_practical(gamma_p: float, eps0: float, eps_th: float = 0.0) -> float:
    """Gamma_p / (eps0 - eps_th); SQS-type when >= 2."""
    d = eps0 - eps_th
    if not d > 0:
        raise ModelValidityError(f"level at or below threshold (eps0 - eps_th = {d:.6g})")
    if gamma_p < 0:
        raise ModelValidityError("negative width")
    return gamma_p / d


def is_sqs(ratio: float) -> bool:
    return bool(ratio >= 1.0)


def is_sqs_practical(ratio2: float) -> bool:
    return bool(ratio2 >= 2.0)


@dataclass
class CriterionReport:
    """Both criterion forms for one box system.

    Missing entries are None, with the reason in ``notes``.
    """

    params: dict
    pole: ComplexPole | None = None
    ratio: float | None = None
    gamma_golden: float | None = None
    eps0_bare: float = float("nan")
    ratio2_pole: float | None = None
    ratio2_bare: float | None = None
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.notes

    def lines(self) -> list[str]:
        out = [format_header(self.params)]
        if self.pole is not None:
            z = self.pole.z
            out.append(f"pole            z_p = {z.real:.10g} {z.imag:+.10g}i")
        out.append(f"bare level      eps0 = {self.eps0_bare:.10g}")
        if self.ratio is not None:
            out.append(f"exact           |Im z_p|/Q = {self.ratio:.6g}  sqs={is_sqs(self.ratio)}")
        if self.gamma_golden is not None:
            out.append(f"golden rule     Gamma_p = {self.gamma_golden:.6g}")
        if self.ratio2_pole is not None:
            out.append(
                f"practical       Gamma_p/(Re z_p - eps_th) = {self.ratio2_pole:.6g}  sqs={is_sqs_practical(self.ratio2_pole)}"
            )
        if self.ratio2_bare is not None:
            out.append(
                f"practical/bare  Gamma_p/(eps0 - eps_th) = {self.ratio2_bare:.6g}  sqs={is_sqs_practical(self.ratio2_bare)}"
            )
        out.extend(f"unavailable: {n}" for n in self.notes)
        return out


def evaluate_criteria(sys: BoxSystem, n_base: int = 500) -> CriterionReport:
    """Exact and practical criteria for a box system.

    The golden-rule width is 2 pi sigma evaluated at Re z_p (or at the bare
    level for the bare variant), with sigma from a table of ``n_base``
    resolution.  Failures of individual pieces are recorded, not raised.
    """
    rep = CriterionReport(dict(sys.params(), n_base=n_base), eps0_bare=bare_level(sys))
    try:
        rep.pole = pole_exact_box(sys)
        rep.ratio = sqs_criterion(rep.pole, sys.eps_th)
    except (NumericalError, ModelValidityError) as exc:
        rep.notes.append(f"exact criterion: {exc}")
    try:
        table = build_table(sys, n_base=n_base)
        sig = sigma_from_rho(table)
    except (NumericalError, ModelValidityError) as exc:
        rep.notes.append(f"golden rule: {exc}")
        return rep
    lo, hi = sig.grid[1], sig.grid[-2]
    if rep.pole is not None and lo <= rep.pole.z.real <= hi:
        rep.gamma_golden = golden_rule_width(sig, rep.pole.z.real)
        rep.ratio2_pole = sqs_criterion_practical(rep.gamma_golden, rep.pole.z.real, sys.eps_th)
    elif rep.pole is not None:
        rep.notes.append("practical criterion: Re z_p outside the table")
    if lo <= rep.eps0_bare <= hi:
        g_bare = golden_rule_width(sig, rep.eps0_bare)
        if rep.gamma_golden is None:
            rep.gamma_golden = g_bare
        rep.ratio2_bare = sqs_criterion_practical(g_bare, rep.eps0_bare, sys.eps_th)
    return rep


# ---------------------------------------------------------------------------
# Q -> G0


class PoleCache:
    """Exact poles keyed by (G, G0, u) rounded to 12 significant digits.

    Failures are cached too, as the exception instance.
    """

    def __init__(self):
        self._store = {}
        self.hits = 0

    @staticmethod
    def key(G, G0, u):
        return tuple(float(f"{x:.12g}") for x in (G, G0, u))

    def pole(self, G, G0, u) -> ComplexPole:
        k = self.key(G, G0, u)
        if k in self._store:
            self.hits += 1
            hit = self._store[k]
        else:
            try:
                hit = pole_exact_box(BoxSystem(*k))
            except (NumericalError, ModelValidityError) as exc:
                hit = exc
            self._store[k] = hit
        if isinstance(hit, Exception):
            raise hit
        return hit


def solve_G0_for_Q(G: float, u: float, Q_target: float, cache: PoleCache | None = None) -> float:
    """Well depth G0 for which Re z_p - eps_th equals ``Q_target``.

    Re z_p decreases with G0.  The bracket starts at the bare relation
    G0 = pi^2 - Q and is widened downward (or upward) until the sign
    changes; Brent's method then finishes.
    """
    if not Q_target > 0:
        raise ModelValidityError("Q_target must be positive")
    cache = cache or PoleCache()

    def f(G0):
        try:
            return cache.pole(G, G0, u).z.real - Q_target
        except (NumericalError, ModelValidityError):
            return -Q_target

    hi = max(PI2 - Q_target, 0.0)
    f_hi = f(hi)
    d = 0.5
    while f_hi > 0:
        lo, f_lo = hi, f_hi
        hi = hi + d
        d *= 2
        if hi > PI2:
            hi = PI2
            f_hi = f(hi)
            if f_hi > 0:
                raise NumericalError("no sign change in bracket after expansion")
            break
        f_hi = f(hi)
    else:
        lo, d = hi, 0.5
        f_lo = f_hi
        while f_lo <= 0:
            if lo == 0.0:
                raise ModelValidityError(
                    f"Q_target={Q_target:g} not attainable with G0 >= 0 at G={G:g}, u={u:g}"
                )
            hi = lo
            lo = max(lo - d, 0.0)
            d *= 2
            f_lo = f(lo)
    G0 = optimize.brentq(f, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(G0)) >= 1e-6 * max(Q_target, 1e-3):
        raise NumericalError(f"G0 inversion did not reach Q_target (residual {f(G0):.3g})")
    return float(G0)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepGrid:
    """Matrices over the (G, Q) plane; rows follow Q, columns follow G.

    Missing cells hold NaN; ``failures`` maps (i_Q, i_G) to the reason.
    """

    G_values: np.ndarray
    Q_values: np.ndarray
    u: float
    ratio: np.ndarray
    g0: np.ndarray
    re_z: np.ndarray
    im_z: np.ndarray
    ratio2: np.ndarray | None = None
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (len(self.Q_values), len(self.G_values))
        for m in (self.ratio, self.g0, self.re_z, self.im_z):
            if m.shape != shape:
                raise ValueError("matrix dimensions must match the axes")

    def params(self) -> dict:
        G, Q = self.G_values, self.Q_values
        return {
            "G_min": float(G[0]),
            "G_max": float(G[-1]),
            "G_n": len(G),
            "Q_min": float(Q[0]),
            "Q_max": float(Q[-1]),
            "Q_n": len(Q),
            "u": self.u,
        }

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(format_header(self.params()) + "\n")
        buf.write("G,Q,G0,re_z,im_z,ratio\n")

        def f(x):
            return "" if not np.isfinite(x) else f"{x:.17g}"

        for i, Q in enumerate(self.Q_values):
            for j, G in enumerate(self.G_values):
                row = (G, Q, self.g0[i, j], self.re_z[i, j], self.im_z[i, j], self.ratio[i, j])
                buf.write(",".join(f(float(x)) for x in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def sweep_cell(G: float, Q: float, u: float, practical: bool = False):
    """(G0, Re z, Im z, ratio, ratio2, failure) for one cell.

    Each cell owns its pole cache, so the result cannot depend on the order
    in which cells are computed.
    """
    cache = PoleCache()
    nan = float("nan")
    try:
        G0 = solve_G0_for_Q(G, u, Q, cache)
        # cached poles sit at rounded G0; the reported one is solved at G0 itself
        pole = pole_exact_box(BoxSystem(G, G0, u))
        ratio = sqs_criterion(pole, 0.0)
    except (NumericalError, ModelValidityError) as exc:
        return (nan, nan, nan, nan, nan, str(exc))
    ratio2 = nan
    if practical:
        try:
            sig = sigma_from_rho(build_table(BoxSystem(G, G0, u), n_base=500))
            e = pole.z.real
            if sig.grid[1] <= e <= sig.grid[-2]:
                ratio2 = sqs_criterion_practical(golden_rule_width(sig, e), e, 0.0)
        except (NumericalError, ModelValidityError):
            pass
    return (G0, pole.z.real, pole.z.imag, ratio, ratio2, None)


def _cell_star(args):
    return sweep_cell(*args)


def sweep(G_values, Q_values, u: float = 1e-4, workers: int = 1, practical: bool = False) -> SweepGrid:
    """Exact SQS criterion over a (G, Q) grid.

    ``workers > 1`` distributes cells over processes; results are placed by
    cell index, so the matrices equal the serial ones.
    """
    G_values = np.asarray(G_values, dtype=float)
    Q_values = np.asarray(Q_values, dtype=float)
    if G_values.size == 0 or Q_values.size == 0:
        raise ModelValidityError("empty sweep axis")
    if np.any(G_values <= 0) or np.any(Q_values <= 0) or not u > 0:
        raise ModelValidityError("sweep ranges must be positive")
    cells = [(float(G), float(Q), float(u), practical) for Q in Q_values for G in G_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_cell_star, cells, chunksize=max(1, len(cells) // (4 * workers))))
    else:
        results = [sweep_cell(*c) for c in cells]
    shape = (Q_values.size, G_values.size)
    mats = [np.full(shape, np.nan) for _ in range(5)]
    failures = {}
    for n, res in enumerate(results):
        i, j = divmod(n, G_values.size)
        for m, v in zip(mats, res[:5]):
            m[i, j] = v
        if res[5] is not None:
            failures[(i, j)] = res[5]
    g0, re_z, im_z, ratio, ratio2 = mats
    return SweepGrid(G_values, Q_values, float(u), ratio, g0, re_z, im_z, ratio2 if practical else None, failures)


def default_axes():
    G = np.linspace(*DEFAULT_G)
    Q = np.geomspace(*DEFAULT_Q)
    return G, Q


# ---------------------------------------------------------------------------
# pole report


def pole_report(model_params: dict, pole: ComplexPole, eps_th: float = 0.0) -> dict:
    """Dictionary for the pole JSON file.  ``residual`` is null for first-order poles."""
    Q = pole.z.real - eps_th
    ratio = abs(pole.z.imag) / Q if Q > 0 else None
    residual = pole.residual if math.isfinite(pole.residual) else None
    return {
        "model": model_params.get("model"),
        "params": {k: v for k, v in model_params.items() if k != "model"},
        "method": pole.method,
        "re_z": pole.z.real,
        "im_z": pole.z.imag,
        "residual": residual,
        "Q": Q,
        "gamma_p": pole.gamma,
        "criterion_ratio": ratio,
    }


def write_pole_json(report: dict, path=None, header_params: dict | None = None) -> str:
    """JSON text preceded by a '#' comment line; read back with :func:`read_pole_json`."""
    head = dict(header_params or {})
    if not head:
        head = {"model": report["model"], **report["params"], "method": report["method"]}
    text = format_header(head) + "\n" + json.dumps(report, indent=2) + "\n"
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_pole_json(path) -> dict:
    with open(path) as fh:
        body = "".join(ln for ln in fh if not ln.startswith("#"))
    return json.loads(body)
