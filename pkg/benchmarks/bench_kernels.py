"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --repeat 3

Each kernel is run on the same inputs with both backends; the table lists
the best wall time of ``--repeat`` runs and the largest difference between
the two results.
"""
import argparse
import sys
import timeit

import numpy as np

from sqsdecay import kernels
from sqsdecay.model import BoxSystem
from sqsdecay.spectral import build_table


def _cases(n_tau):
    table = build_table(BoxSystem(20.0, 0.0, 1e-4), n_base=500)
    g = np.ascontiguousarray(table.grid)
    v = np.ascontiguousarray(table.values)
    coef = np.ascontiguousarray(kernels.cubic_coefficients(g, v), dtype=complex)
    taus = np.linspace(0.0, 100.0, n_tau)
    y = g[1:-1:4].copy()
    rng = np.random.default_rng(7)
    nq = 4 * g.size
    xq = np.sort(rng.uniform(g[0], g[-1], nq)) + 1e-7
    wq = rng.normal(size=nq)
    n = 4 * n_tau
    k = np.arange(n + 1)
    W = [1e-3 * np.exp(-0.01 * k) * (1 + 0.1j) / (m + 1) for m in range(3)]
    return {
        "filon_sum": lambda b: b.filon_sum(g, coef, taus),
        "filon_sum_uniform": lambda b: b.filon_sum_uniform(g, coef[None], taus[1], taus.size - 1),
        "pv_linear": lambda b: b.pv_linear(g, v, y),
        "cauchy_sum": lambda b: b.cauchy_sum(xq, wq, y),
        "volterra_march": lambda b: b.volterra_march(*W, n),
    }, {"grid": g.size, "taus": n_tau, "pv points": y.size, "march steps": n}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n-tau", type=int, default=400)
    args = ap.parse_args(argv)

    try:
        compiled = kernels.get_backend("cython")
    except ImportError:
        compiled = None
    python = kernels.get_backend("python")
    if compiled is None:
        print("compiled extension not built; only the numpy backend is timed")
    cases, sizes = _cases(args.n_tau)
    print("sizes: " + ", ".join(f"{k}={v}" for k, v in sizes.items()))
    print(f"{'kernel':<20}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases.items():
        tp = min(timeit.repeat(lambda: fn(python), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:<20}{tp:12.4f}")
            continue
        tc = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(fn(python)) - np.asarray(fn(compiled)))))
        print(f"{name:<20}{tp:12.4f}{tc:12.4f}{tp / tc:10.1f}{diff:12.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
