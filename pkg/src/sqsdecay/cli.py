"""Command line front end: ``sqsdecay <subcommand> --flag=value ...``.

Exit status is 0 on success, 2 for invalid input and 3 when a numerical
method fails.  ``verify`` returns 1 if a gating acceptance check fails.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .dynamics import decay_rate_series, survival_series, volterra_evolve
from .errors import ModelValidityError, NumericalError
from .model import BoxSystem, TrapezoidSystem
from .resolvent import first_moment, pole_exact_box, pole_first_order, sigma_from_rho
from .spectral import SpectralTable, build_table

VOLTERRA_STEP = 0.02
EXIT_OK, EXIT_CHECKS, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("sqsdecay")


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _model(args):
    if args.model == "box":
        return BoxSystem(args.G, args.G0, args.u)
    return TrapezoidSystem(args.b, args.c, args.d, args.h1, args.h2)


def _add_model_flags(p, trapezoid=True):
    choices = ("box", "trapezoid") if trapezoid else ("box",)
    p.add_argument("--model", choices=choices, default="box")
    g = p.add_argument_group("box model")
    g.add_argument("--G", type=float, default=20.0, help="barrier strength (height G/u)")
    g.add_argument("--G0", type=float, default=0.0, help="well depth")
    g.add_argument("--u", type=float, default=1e-4, help="barrier width")
    if trapezoid:
        t = p.add_argument_group("trapezoid model")
        t.add_argument("--b", type=float, default=1.2)
        t.add_argument("--c", type=float, default=1.4)
        t.add_argument("--d", type=float, default=1.6)
        t.add_argument("--h1", type=float, default=400.0)
        t.add_argument("--h2", type=float, default=7.0)


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectral(args):
    table = build_table(_model(args), eps_max=args.emax, n_base=args.n)
    table = replace(table, params=dict(table.params, emax=args.emax, n=args.n))
    _emit(table.to_csv(), args.out)
    log.info("%d points, deficit %.3g", table.grid.size, table.deficit)


def cmd_evolve(args):
    table = SpectralTable.from_csv(args.table)
    n = int(round(args.tmax / args.dt))
    if n < 1 or not np.isclose(n * args.dt, args.tmax, rtol=1e-9):
        raise ModelValidityError("--tmax must be a positive multiple of --dt")
    taus = args.dt * np.arange(n + 1)
    if args.method == "volterra":
        # the march needs steps of about 0.02; keep every m-th point
        m = max(1, int(np.ceil(args.dt / VOLTERRA_STEP - 1e-9)))
        full = volterra_evolve(sigma_from_rho(table), first_moment(table), args.tmax, args.dt / m)
        rec = replace(full, times=taus, amplitude=full.amplitude[::m], quadrature_error=full.quadrature_error[::m])
    else:
        rec = survival_series(table, taus)
    rec = decay_rate_series(rec, args.window)
    rec.params = dict(model=table.model_tag, **table.params, method=args.method, table=os.path.basename(args.table), tmax=args.tmax, dt=args.dt, window=args.window)
    _emit(rec.to_csv(), args.out)
    if rec.flagged:
        log.warning("error estimate reaches %.3g (includes the table tail weight)", float(rec.quadrature_error.max()))


def cmd_pole(args):
    model = _model(args)
    if args.method == "exact":
        if not isinstance(model, BoxSystem):
            raise ModelValidityError("the exact pole is available for the box model only")
        pole = pole_exact_box(model)
    else:
        table = build_table(model, n_base=args.n)
        eps0 = first_moment(table) if args.eps0 is None else args.eps0
        pole = pole_first_order(sigma_from_rho(table), eps0)
    head = dict(model.params(), method=args.method)
    if args.method == "first_order":
        head.update(n=args.n, eps0=eps0)
    report = harness.pole_report(model.params(), pole, model.eps_th)
    _emit(harness.write_pole_json(report, None, head), args.out)


def cmd_criterion(args):
    rep = harness.evaluate_criteria(BoxSystem(args.G, args.G0, args.u), n_base=args.n)
    print("\n".join(rep.lines()))
    if rep.pole is None and rep.ratio2_bare is None:
        raise NumericalError("; ".join(rep.notes))


def cmd_scan(args):
    if args.G_n < 1 or args.Q_n < 1:
        raise ModelValidityError("grid sizes must be positive")
    G = np.linspace(args.G_min, args.G_max, args.G_n)
    Q = np.geomspace(args.Q_min, args.Q_max, args.Q_n)
    grid = harness.sweep(G, Q, args.u, workers=args.workers)
    _emit(grid.to_csv(), args.out)
    for (i, j), why in sorted(grid.failures.items()):
        log.info("cell G=%g Q=%g: %s", G[j], Q[i], why)


def cmd_verify(args):
    from .acceptance import all_gating_pass, run_verify

    results = run_verify(args.out_dir)
    return EXIT_OK if all_gating_pass(results) else EXIT_CHECKS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqsdecay", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectral", help="tabulate the spectral density")
    _add_model_flags(p)
    p.add_argument("--emax", type=float, default=4000.0)
    p.add_argument("--n", type=int, default=2000, help="grid resolution parameter")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("evolve", help="survival probability and decay rate from a table")
    p.add_argument("--table", required=True)
    p.add_argument("--tmax", type=float, default=500.0)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--window", type=float, default=5.0, help="boxcar length for Gamma")
    p.add_argument("--method", choices=("quadrature", "volterra"), default="quadrature")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("pole", help="resonance pole as JSON")
    _add_model_flags(p)
    p.add_argument("--method", choices=("exact", "first_order"), default="exact")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--eps0", type=float, help="level for first_order (default: mean energy of the table)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pole)

    p = sub.add_parser("criterion", help="print both SQS criterion forms")
    _add_model_flags(p, trapezoid=False)
    p.add_argument("--n", type=int, default=500)
    p.set_defaults(func=cmd_criterion)

    p = sub.add_parser("scan", help="exact criterion over a (G, Q) grid")
    G, Q = harness.DEFAULT_G, harness.DEFAULT_Q
    p.add_argument("--G-min", type=float, default=G[0])
    p.add_argument("--G-max", type=float, default=G[1])
    p.add_argument("--G-n", type=int, default=G[2])
    p.add_argument("--Q-min", type=float, default=Q[0])
    p.add_argument("--Q-max", type=float, default=Q[1])
    p.add_argument("--Q-n", type=int, default=Q[2])
    p.add_argument("--u", type=float, default=1e-4)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--out-dir", default="verify-artifacts")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        code = args.func(args)
    except ModelValidityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
