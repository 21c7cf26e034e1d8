"""Compiled vs numpy kernels: objective/gradient, projection, and a full SPG run.

    python3 benchmarks/bench_kernels.py [--n 60] [--repeat 200]
"""
import argparse
import time

import numpy as np

from trombone import _kernels_py
from trombone.geometry import GeometryConfig
from trombone.nlp import Bounds, Weights

try:
    from trombone import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def problem(n, seed=0):
    cfg = GeometryConfig()
    rng = np.random.default_rng(seed)
    gates = np.array(list(cfg.gates.values()))
    pick = gates[rng.integers(0, len(gates), n)]
    ex, ey = pick[:, 0].copy(), pick[:, 1].copy()
    side = np.where(ey > cfg.faf.y, 1.0, -1.0)
    tau = np.sort(rng.uniform(0, 3600, n))
    b = Bounds()
    lo, hi = b.tightened()
    X = lo + rng.random((n, 4)) * (hi - lo)
    _kernels_py.project(X, lo, hi)
    geo = (tau, ex, ey, side, cfg.faf.x, cfg.faf.y, cfg.turn_radius_r)
    cost = (66.0, 0.05, Weights().as_array(), b.speed_max(), b.inv_span())
    return X, geo, cost, lo, hi


def timed(fn, repeat):
    fn()
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60, help="aircraft per problem")
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    X, geo, cost, lo, hi = problem(args.n)
    scale = np.maximum(hi - lo, 1.0)
    impls = [("python", _kernels_py)] + ([("cython", _kernels_c)] if _kernels_c else [])
    rows = []
    for name, k in impls:
        t_obj = timed(lambda: k.objective(X, *geo, *cost), args.repeat)
        t_proj = timed(lambda: k.project(X.copy(), lo, hi), args.repeat)
        t_spg = timed(lambda: k.spg(X, *geo, *cost, lo, hi, scale, 500, 0.0, 50), 3)
        rows.append((name, t_obj, t_proj, t_spg))
    print(f"n = {args.n} aircraft")
    print(f"{'backend':8s} {'objective':>12s} {'project':>12s} {'spg x500':>12s}")
    for name, a, b, c in rows:
        print(f"{name:8s} {a * 1e6:10.1f}us {b * 1e6:10.1f}us {c * 1e3:10.1f}ms")
    if len(rows) == 2:
        py, cy = rows
        print("speedup  " + " ".join(f"{p / c:11.1f}x" for p, c in zip(py[1:], cy[1:])))
    else:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
