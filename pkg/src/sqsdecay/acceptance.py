"""Acceptance suite behind ``sqsdecay verify``.

Each check returns a :class:`CheckResult`.  ``detail`` is deterministic and
goes into the artifacts; ``timing`` is printed but never written, so two
runs produce identical files.
"""
from __future__ import annotations

import filecmp
import math
import os
import tempfile
import time
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import (
    amplitudes,
    decay_rate_series,
    interpolant_integral,
    plateau_statistics,
    survival_series,
    tail_fit,
    volterra_evolve,
)
from .errors import ModelValidityError, NumericalError
from .harness import (
    evaluate_criteria,
    format_header,
    pole_report,
    sqs_criterion,
    sweep,
    write_pole_json,
)
from .model import BoxSystem, TrapezoidSystem, initial_state_overlap_oracle
from .resolvent import (
    CouplingDensity,
    first_moment,
    golden_rule_width,
    pole_exact_box,
    pole_first_order,
    rho_from_sigma,
    sigma_from_rho,
)
from .spectral import SpectralTable, build_table, rho_box, threshold_coefficient_box, threshold_fit

EXP = BoxSystem(20.0, 0.0, 1e-4)
SQS = BoxSystem(20.0, 8.957335, 1e-4)
TRAPEZOID = TrapezoidSystem(1.2, 1.4, 1.6, 400.0, 7.0)

RE_EXP, RE_SQS = 8.97365, 6.55445e-4
WINDOW = 5.0
DT = 0.5
T_MAX = 500.0
ORACLE_SEED = 20240611


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    gating: bool = True
    timing: str = ""

    def line(self, with_timing: bool = True) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if not self.gating:
            tag += " (non-gating)"
        extra = f" [{self.timing}]" if with_timing and self.timing else ""
        return f"criterion {self.number:2d} {tag}: {self.title}; {self.detail}{extra}"


def _fails(exc) -> str:
    return f"{type(exc).__name__}: {exc}"


class Workspace:
    """Tables, records and poles shared between checks, built on first use."""

    def __init__(self, backend=None):
        self.backend = backend

    @cached_property
    def table_exp(self) -> SpectralTable:
        return build_table(EXP)

    @cached_property
    def table_sqs(self) -> SpectralTable:
        return build_table(SQS)

    @cached_property
    def table_trapezoid(self) -> SpectralTable:
        return build_table(TRAPEZOID)

    def table(self, which: str) -> SpectralTable:
        return getattr(self, f"table_{which}")

    def record(self, which: str):
        key = f"_record_{which}"
        if not hasattr(self, key):
            taus = DT * np.arange(int(round(T_MAX / DT)) + 1)
            rec = survival_series(self.table(which), taus, self.backend)
            setattr(self, key, decay_rate_series(rec, WINDOW))
        return getattr(self, key)

    def sigma(self, which: str):
        key = f"_sigma_{which}"
        if not hasattr(self, key):
            setattr(self, key, sigma_from_rho(self.table(which)))
        return getattr(self, key)


# ---------------------------------------------------------------------------
# individual checks


def check_pole_regression(ws: Workspace) -> CheckResult:
    parts, ok, times = [], True, []
    for name, sys, target, tol in (("G0=0", EXP, RE_EXP, 0.01), ("G0=8.957335", SQS, RE_SQS, 1e-5)):
        t0 = time.perf_counter()
        try:
            pole = pole_exact_box(sys)
        except (NumericalError, ModelValidityError) as exc:
            times.append(f"{name} {time.perf_counter() - t0:.2f}s")
            parts.append(f"{name}: no pole ({exc})")
            ok = False
            continue
        dt = time.perf_counter() - t0
        times.append(f"{name} {dt:.2f}s")
        good = abs(pole.z.real - target) <= tol and dt < 1.0
        ok &= good
        parts.append(f"{name}: Re z_p={pole.z.real:.8g} (target {target:g} +- {tol:g})")
    return CheckResult(1, "pole regression", ok, "; ".join(parts), timing=", ".join(times))


def check_separation(ws: Workspace) -> CheckResult:
    ratios = []
    for sys in (EXP, SQS):
        try:
            ratios.append(sqs_criterion(pole_exact_box(sys)))
        except (NumericalError, ModelValidityError) as exc:
            ratios.append(exc)
    left, right = ratios
    txt = [
        f"{lbl}: {'%.6g' % r if isinstance(r, float) else 'undefined (' + str(r) + ')'}"
        for lbl, r in zip(("left ratio", "right ratio"), ratios)
    ]
    ok = isinstance(left, float) and isinstance(right, float) and left < 1.0 <= right
    return CheckResult(2, "criterion separation", ok, "; ".join(txt))


def check_exponential_regime(ws: Workspace) -> CheckResult:
    rec = ws.record("exp")
    mean, rel_std, _ = plateau_statistics(rec, 20.0, 200.0)
    eps0 = first_moment(ws.table_exp)
    gr = golden_rule_width(ws.sigma("exp"), eps0)
    dev = abs(mean / gr - 1.0)
    ok = rel_std < 0.05 and dev <= 0.10
    return CheckResult(
        3,
        "exponential regime",
        ok,
        f"std/mean on [20,200]={rel_std:.4g} (< 0.05); mean={mean:.6g}, 2 pi sigma(eps0)={gr:.6g}, "
        f"deviation {dev:.3g} (<= 0.1)",
    )


def check_sqs_regime(ws: Workspace) -> CheckResult:
    rec = ws.record("sqs")
    _, _, spread = plateau_statistics(rec, 50.0, 500.0)
    P500 = float(rec.survival[np.searchsorted(rec.times, 500.0)])
    ok = spread > 0.5 and math.exp(-2.0) <= P500 <= math.exp(-0.5)
    return CheckResult(
        4,
        "SQS regime",
        ok,
        f"(max-min)/mean on [50,500]={spread:.4g} (> 0.5); P(500)={P500:.6g} in [{math.exp(-2):.4g}, {math.exp(-0.5):.4g}]",
    )


def check_normalization(ws: Workspace) -> CheckResult:
    parts, ok = [], True
    for which, tol in (("exp", 1e-3), ("sqs", 1e-3), ("trapezoid", 1e-2)):
        t = ws.table(which)
        total = interpolant_integral(t.grid, t.values) + t.tail_estimate
        a0 = complex(amplitudes(t, [0.0], ws.backend)[0][0])
        good = abs(total - 1.0) <= tol and abs(a0 - 1.0) <= tol
        ok &= good
        parts.append(f"{which}: integral={total:.8f}, |a(0)-1|={abs(a0 - 1):.3g} (tol {tol:g})")
    return CheckResult(5, "normalization", ok, "; ".join(parts))


def check_threshold_law(ws: Workspace) -> CheckResult:
    parts, ok = [], True
    for which, sys in (("exp", EXP), ("sqs", SQS), ("trapezoid", TRAPEZOID)):
        p, c = threshold_fit(ws.table(which))
        good = abs(p - 0.5) <= 0.02
        txt = f"{which}: exponent={p:.5f}"
        if isinstance(sys, BoxSystem):
            c_ref = threshold_coefficient_box(sys)
            rel = abs(c / c_ref - 1.0)
            good &= rel <= 0.01
            txt += f", prefactor rel. dev.={rel:.3g}"
        ok &= good
        parts.append(txt)
    return CheckResult(6, "threshold law", ok, "; ".join(parts))


def check_cross_formalism(ws: Workspace, tau_max: float = 100.0, step: float = 0.02) -> CheckResult:
    parts, ok = [], True
    for which in ("exp", "sqs"):
        t = ws.table(which)
        try:
            vrec = volterra_evolve(ws.sigma(which), first_moment(t), tau_max, step, backend=ws.backend)
        except NumericalError as exc:
            parts.append(f"{which}: Volterra failed ({exc})")
            ok = False
            continue
        aq, _ = amplitudes(t, vrec.times, ws.backend)
        diff = float(np.max(np.abs(vrec.amplitude - aq)))
        ok &= diff <= 1e-3
        parts.append(f"{which}: max |a_V - a_Q| on [0,{tau_max:g}]={diff:.3g}")
    return CheckResult(7, "cross-formalism", ok, "; ".join(parts) + " (tol 1e-3)")


def oracle_energies(n: int = 20, seed: int = ORACLE_SEED) -> np.ndarray:
    """Log-uniform energies in [1e-3, 1e3] from a fixed seed."""
    rng = np.random.default_rng(seed)
    return np.sort(10.0 ** rng.uniform(-3.0, 3.0, n))


def check_oracle(ws: Workspace) -> CheckResult:
    parts, ok = [], True
    eps = oracle_energies()
    for name, sys in (("exp", EXP), ("sqs", SQS)):
        fast = rho_box(sys, eps)
        ref = np.array([initial_state_overlap_oracle(sys, e) for e in eps])
        rel = float(np.max(np.abs(fast / ref - 1.0)))
        ok &= rel <= 1e-8
        parts.append(f"{name}: max rel. dev.={rel:.3g}")
    return CheckResult(8, "oracle equivalence", ok, "; ".join(parts) + " (tol 1e-8, 20 energies)")


def synthetic_sigma(n: int = 2000) -> CouplingDensity:
    g = np.concatenate([[0.0], np.geomspace(1e-8, 200.0, n)])
    return CouplingDensity(g, 0.05 * np.sqrt(g) * np.exp(-g / 4.0), 0.0)


def check_pole_methods(ws: Workspace) -> CheckResult:
    exact = pole_exact_box(EXP).z
    fo = pole_first_order(ws.sigma("exp"), first_moment(ws.table_exp)).z
    dre = abs(fo.real / exact.real - 1.0)
    dim = abs(fo.imag / exact.imag - 1.0)
    sig = synthetic_sigma()
    rho = rho_from_sigma(sig, 2.0)
    back = sigma_from_rho(SpectralTable(0.0, sig.grid, rho, "synthetic", {}))
    sel = (sig.grid > 1e-3) & (sig.grid < 60.0)
    rt = float(np.max(np.abs(back.values[sel] / sig.values[sel] - 1.0)))
    ok = dre <= 0.15 and dim <= 0.15 and rt <= 1e-3
    return CheckResult(
        9,
        "pole-method consistency",
        ok,
        f"first-order vs exact: Re dev.={dre:.3g}, Im dev.={dim:.3g} (<= 0.15); sigma round trip={rt:.3g} (<= 1e-3)",
    )


def synthetic_table(n: int = 4000) -> SpectralTable:
    """rho = 2/sqrt(pi) sqrt(eps) exp(-eps); a(tau) = (1 + i tau)^-3/2."""
    g = np.concatenate([[0.0], np.geomspace(1e-10, 60.0, n)])
    return SpectralTable(0.0, g, 2.0 / math.sqrt(math.pi) * np.sqrt(g) * np.exp(-g), "synthetic", {})


def check_tail(ws: Workspace) -> list[CheckResult]:
    rec = survival_series(synthetic_table(), np.geomspace(1.0, 2000.0, 400), ws.backend)
    fit = tail_fit(rec, 100.0, 1000.0)
    gate = CheckResult(
        10,
        "long-time tail (synthetic sqrt threshold)",
        abs(fit.exponent + 3.0) <= 0.3,
        f"slope on [100,1000]={fit.exponent:.5f} (-3 +- 0.3)",
    )
    try:
        brec = survival_series(ws.table_exp, np.linspace(0.0, 3000.0, 6001), ws.backend)
        bfit = tail_fit(brec, 150.0, 1500.0)
        box = CheckResult(
            10,
            "long-time tail (box G0=0)",
            abs(bfit.exponent + 3.0) <= 0.3,
            f"slope on [150,1500]={bfit.exponent:.4f}, local-slope spread={bfit.slope_spread:.3g}",
            gating=False,
        )
    except (NumericalError, ModelValidityError) as exc:
        box = CheckResult(10, "long-time tail (box G0=0)", False, _fails(exc), gating=False)
    return [gate, box]


# ---------------------------------------------------------------------------
# artifacts and determinism

SCAN_G = (10.0, 20.0, 30.0)
SCAN_Q = (1e-3, 0.1, 8.97365)


def write_artifacts(ws: Workspace, out_dir) -> list[str]:
    """Write the verification artifacts; returns their file names."""
    os.makedirs(out_dir, exist_ok=True)
    names = []

    def put(name, text):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)
        names.append(name)

    for which in ("exp", "sqs", "trapezoid"):
        put(f"rho_{which}.csv", ws.table(which).to_csv())
    for which in ("exp", "sqs"):
        put(f"decay_{which}.csv", ws.record(which).to_csv())
    for name, sys in (("exp", EXP), ("sqs", SQS)):
        try:
            pole = pole_exact_box(sys)
            put(f"pole_{name}.json", write_pole_json(pole_report(sys.params(), pole), None, dict(sys.params(), method="exact")))
        except (NumericalError, ModelValidityError) as exc:
            put(f"pole_{name}.txt", format_header(dict(sys.params(), method="exact")) + f"\nno pole: {exc}\n")
        put(f"criterion_{name}.txt", "\n".join(evaluate_criteria(sys).lines()) + "\n")
    put("scan.csv", sweep(SCAN_G, SCAN_Q, 1e-4).to_csv())
    return names


def check_determinism(ws: Workspace, out_dir, names) -> CheckResult:
    """Regenerate every artifact from a fresh workspace and compare bytes."""
    with tempfile.TemporaryDirectory() as tmp:
        again = write_artifacts(Workspace(ws.backend), tmp)
        same = again == names
        diffs = [] if same else ["file lists differ"]
        if same:
            _, mismatch, errors = filecmp.cmpfiles(out_dir, tmp, names, shallow=False)
            diffs = mismatch + errors
    return CheckResult(
        11,
        "determinism",
        not diffs,
        f"{len(names)} artifacts byte-identical" if not diffs else "differing: " + ", ".join(diffs),
    )


CHECKS = (
    check_pole_regression,
    check_separation,
    check_exponential_regime,
    check_sqs_regime,
    check_normalization,
    check_threshold_law,
    check_cross_formalism,
    check_oracle,
    check_pole_methods,
)


def run_check(fn, ws):
    t0 = time.perf_counter()
    try:
        res = fn(ws)
    except (NumericalError, ModelValidityError) as exc:
        n = CHECKS.index(fn) + 1 if fn in CHECKS else 0
        res = CheckResult(n, fn.__name__.removeprefix("check_").replace("_", " "), False, _fails(exc))
    results = res if isinstance(res, list) else [res]
    for r in results:
        if not r.timing:
            r.timing = f"{time.perf_counter() - t0:.1f}s"
    return results


def run_verify(out_dir, backend=None, echo=print) -> list[CheckResult]:
    """All checks plus artifacts in ``out_dir``; ``summary.txt`` lists the results."""
    ws = Workspace(backend)
    results = []
    for fn in CHECKS + (check_tail,):
        for r in run_check(fn, ws):
            results.append(r)
            echo(r.line())
    names = write_artifacts(ws, out_dir)
    t0 = time.perf_counter()
    det = check_determinism(ws, out_dir, names)
    det.timing = f"{time.perf_counter() - t0:.1f}s"
    results.append(det)
    echo(det.line())
    with open(os.path.join(out_dir, "summary.txt"), "w", newline="") as fh:
        fh.write(format_header({"suite": "acceptance", "artifacts": len(names)}) + "\n")
        fh.write("\n".join(r.line(with_timing=False) for r in results) + "\n")
    return results


def all_gating_pass(results) -> bool:
    return all(r.passed for r in results if r.gating)
