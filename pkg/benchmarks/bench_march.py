#!/usr/bin/env python3
"""Time the compiled RK4 kernel against the numpy fallback on the reduced generator."""

from __future__ import annotations

import argparse
import time

import numpy as np

from odeblowup import _march
from odeblowup.grid import build_grid
from odeblowup.linop import assemble_generator, default_dt, spectral_projection
from odeblowup.model import make_params


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(d, p, N, steps, repeat, kind_name):
    params = make_params(d, p)
    gen = assemble_generator(params, build_grid(N))
    proj = spectral_projection(gen)
    A = np.ascontiguousarray(gen.reduced)
    dt = default_dt(gen.grid)
    x = gen.grid.nodes[1:]
    u0 = 1e-3 * np.concatenate([np.exp(-x * x), x * x])
    kind = {"linear": _march.LINEAR, "nonlinear": _march.CUBIC if p == 3 else _march.POWER}[kind_name]
    left, right = np.ascontiguousarray(proj.left_mode), np.ascontiguousarray(proj.right_reduced)
    out = {}
    impls = {"python": _march.rk4_march_py}
    try:
        from odeblowup._kernels import rk4_march as compiled

        impls["compiled"] = compiled
    except ImportError:
        pass
    for name, fn in impls.items():
        u = u0.copy()

        def run():
            u[:] = u0
            fn(A, u, dt, steps, N, float(p), params.c_p, kind, left, right)

        out[name] = (_time(run, repeat), u.copy())
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--p", type=float, default=3.0)
    args = ap.parse_args()

    print(f"{'N':>5} {'mode':>10} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'max |diff|':>11}")
    for N in args.sizes:
        for mode in ("linear", "nonlinear"):
            res = bench(args.d, args.p, N, args.steps, args.repeat, mode)
            tp, up = res["python"]
            if "compiled" in res:
                tc, uc = res["compiled"]
                diff = float(np.max(np.abs(up - uc)))
                print(f"{N:5d} {mode:>10} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f} {diff:11.2e}")
            else:
                print(f"{N:5d} {mode:>10} {tp:11.4f} {'n/a':>13} {'n/a':>8} {'n/a':>11}")


if __name__ == "__main__":
    main()
