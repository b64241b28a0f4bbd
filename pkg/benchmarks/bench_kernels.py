"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel: best wall time for each backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from tsshuffle import kernels
from tsshuffle.heatml import HeatGeometry, HeatParams, LayerGrid, assemble, explicit_dt_bound
from tsshuffle.schedule import make_schedule


def cases():
    s = make_schedule(1, [2, 3, 2, 5, 4, 3, 2, 2, 3, 2, 2])  # M_n = 69120
    cum = np.array(s.cumulative, dtype=np.int64)
    fac = np.array(s.factors, dtype=np.int64)
    grid = LayerGrid(HeatGeometry(32, 0.1), 16)
    params = HeatParams(1.0, 0.5, 1.0, 0.1)
    sub, diag, sup, mass = assemble(grid, params)
    dt_explicit = 0.9 * explicit_dt_bound(grid, params)
    u0 = np.random.default_rng(0).standard_normal(grid.size)
    yield "compose_block_perm", (cum, fac)
    yield "digit_reversal_inverse", (cum, fac)
    yield "heat_cn_run", (sub, diag, sup, mass, u0, 1e-4, 2000, 500)
    yield "heat_explicit_run", (sub, diag, sup, mass, u0, dt_explicit, 2000, 500)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = kernels.backend_module("python")
    try:
        cy = kernels.backend_module("compiled")
    except ImportError:
        cy = None
        print("compiled kernels not built; timing the numpy fallback only")
    print(f"{'kernel':<24}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, args_ in cases():
        t_py = min(timeit.repeat(lambda: getattr(py, name)(*args_), number=1, repeat=args.repeat))
        if cy is None:
            print(f"{name:<24}{1e3 * t_py:>14.2f}{'-':>16}{'-':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: getattr(cy, name)(*args_), number=1, repeat=args.repeat))
        print(f"{name:<24}{1e3 * t_py:>14.2f}{1e3 * t_cy:>16.2f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
