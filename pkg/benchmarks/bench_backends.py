#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-Python twin.

Times the two hot kernels (cyclic-Jacobi eigenvalues, fixed-step
integration) on identical inputs and verifies the outputs are bit-identical
while at it. Run:

    python3 benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from nlobs._kernels import _pure
from nlobs.simulate import LinearPolynomialField
from nlobs.systems import builtin

try:
    from nlobs._kernels import _core
except ImportError:
    _core = None


def _time(fn, *args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_jacobi(quick):
    rng = np.random.default_rng(0)
    rows = []
    for n in (4, 8, 16, 32):
        s = rng.normal(size=(n, n))
        s = np.ascontiguousarray(0.5 * (s + s.T))
        calls = (500 if quick else 2000) // n

        def many(impl, mat=s, k=calls):
            for _ in range(k):
                out = impl.jacobi_eigvals(mat)
            return out

        t_pure, out_pure = _time(many, _pure, repeat=3 if quick else 5)
        if _core is None:
            rows.append((f"jacobi {n}x{n} ({calls} calls)", t_pure, None, out_pure, None))
            continue
        t_core, out_core = _time(many, _core, repeat=3 if quick else 5)
        rows.append((f"jacobi {n}x{n} ({calls} calls)", t_pure, t_core, out_pure, out_core))
    return rows


def bench_integrator(quick):
    sys3 = builtin("example3")
    gain = np.array([[-1.0], [1.0]])
    f = LinearPolynomialField.coupled_observer(sys3, gain)
    z0 = np.array([0.3, 0.4, -0.5, 0.2])
    rows = []
    for label, method, nsteps in (
        ("rk4 coupled observer", 0, 3000 if quick else 30000),
        ("implicit euler coupled observer", 1, 500 if quick else 3000),
    ):
        hs = np.full(nsteps, 1e-3)
        args = (f.A, f.outs, f.coefs, f.exps, z0, hs, method, 1e-10, 50)
        t_pure, out_pure = _time(_pure.integrate_linpoly, *args, repeat=2)
        if _core is None:
            rows.append((f"{label} ({nsteps} steps)", t_pure, None, out_pure, None))
            continue
        t_core, out_core = _time(_core.integrate_linpoly, *args, repeat=3)
        rows.append((f"{label} ({nsteps} steps)", t_pure, t_core, out_pure, out_core))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    if _core is None:
        print("compiled core not built; timing the pure backend only\n")

    rows = bench_jacobi(args.quick) + bench_integrator(args.quick)
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  {'pure [ms]':>10}  {'compiled [ms]':>13}  {'speedup':>8}  bitwise")
    for label, t_pure, t_core, out_pure, out_core in rows:
        if t_core is None:
            print(f"{label.ljust(width)}  {1e3 * t_pure:10.2f}  {'-':>13}  {'-':>8}  -")
        else:
            same = np.array_equal(np.asarray(out_pure), np.asarray(out_core))
            print(
                f"{label.ljust(width)}  {1e3 * t_pure:10.2f}  {1e3 * t_core:13.2f}"
                f"  {t_pure / t_core:7.1f}x  {'yes' if same else 'NO'}"
            )


if __name__ == "__main__":
    main()
