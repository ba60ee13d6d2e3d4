"""Benchmark: compiled kernels vs the pure NumPy reference.

Times the three hot quadrature kernels on representative solver workloads
and one end-to-end Picard solve through each backend.

    python3 benchmarks/bench_kernels.py [--n-time 256] [--repeats 3]
"""
import argparse
import time
import warnings

import numpy as np

from fracmild import build_interval_basis
from fracmild.backend import get_backend
from fracmild.errors import HolderWarning
from fracmild.moments import LeftTables, RightTables, outer_weight_moments
from fracmild.noise import SeriesNoiseSpec, gen_series_noise
from fracmild.solver import Nonlinearity, solve_mild
from fracmild.spaces import Field, ParamSet


def time_call(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, n_modes, n_nodes, repeats):
    rng = np.random.default_rng(0)
    h = 1.0 / n
    eta = 0.3
    lam = np.sort(rng.uniform(0.0, 2500.0, n_modes))
    b_arr = rng.standard_normal((n + 1, n_modes, n_nodes))
    zc = np.cumsum(rng.standard_normal((n + 1, n_modes)), axis=0) / n
    synth = rng.standard_normal((n_modes, n_nodes))
    explag = np.exp(-np.outer(lam, np.arange(n + 1) * h))
    ltab = LeftTables(lam, h, n, eta)
    rtab = RightTables(h, n, 1.0 - eta)
    w0, w1 = outer_weight_moments(h, n, eta)

    rows = []
    for name in ("python", "compiled"):
        try:
            kern = get_backend(name)
        except ImportError:
            print(f"backend {name!r} unavailable; skipping")
            continue
        t_left = time_call(kern.left_operator_profile, b_arr, h, eta, ltab, repeats=repeats)
        t_right = time_call(kern.right_derivative_table, zc, h, 1.0 - eta, rtab, repeats=repeats)
        psi = kern.left_operator_profile(b_arr, h, eta, ltab)
        wt = kern.right_derivative_table(zc, h, 1.0 - eta, rtab)
        t_conv = time_call(
            kern.convolve_targets, psi, wt, zc, synth, explag, w0, w1, h, eta, repeats=repeats
        )
        rows.append((name, t_left, t_right, t_conv))
    return rows


def bench_solve(n, repeats):
    basis = build_interval_basis(16, 129)
    params = ParamSet.for_basis(basis, alpha=0.21, beta=0.35, gamma=0.3, delta=0.45, hurst=0.8, t0=1.0)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=16, hurst=0.8)
    z = gen_series_noise(spec, basis, n, 1.0, seed=0)
    f = Field(0.25 / (1 + np.arange(1, 17)) ** 2, basis)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)
    rows = []
    for name in ("python", "compiled"):
        try:
            kern = get_backend(name)
        except ImportError:
            continue

        def run():
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HolderWarning)
                solve_mild(f, nl, z, params, tol=1e-7, kernels=kern)

        rows.append((name, time_call(run, repeats=repeats)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-time", type=int, default=256)
    ap.add_argument("--n-modes", type=int, default=16)
    ap.add_argument("--n-nodes", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    print(f"kernel workloads: N={args.n_time}, modes={args.n_modes}, nodes={args.n_nodes}")
    rows = bench_kernels(args.n_time, args.n_modes, args.n_nodes, args.repeats)
    print(f"{'backend':<10} {'left_profile':>14} {'right_table':>14} {'convolve':>14}")
    for name, t1, t2, t3 in rows:
        print(f"{name:<10} {t1*1e3:>12.2f}ms {t2*1e3:>12.2f}ms {t3*1e3:>12.2f}ms")
    if len(rows) == 2:
        (pn, p1, p2, p3), (cn, c1, c2, c3) = rows
        print(f"{'speedup':<10} {p1/c1:>13.2f}x {p2/c2:>13.2f}x {p3/c3:>13.2f}x")

    print(f"\nend-to-end solve: interval 16 modes, N={args.n_time}")
    solve_rows = bench_solve(args.n_time, args.repeats)
    for name, t in solve_rows:
        print(f"{name:<10} {t:>12.3f}s")
    if len(solve_rows) == 2:
        print(f"{'speedup':<10} {solve_rows[0][1]/solve_rows[1][1]:>11.2f}x")


if __name__ == "__main__":
    main()
