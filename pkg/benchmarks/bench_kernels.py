"""Compare the compiled and pure-Python integration kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from sbcstab import _pycore
from sbcstab.collinear import CollinearSystem, initial_state
from sbcstab.planar import PlanarSeed, PlanarSystem, energy_from_seed
from sbcstab.stability import build_Y0_collinear

try:
    from sbcstab import _ccore
except ImportError:
    _ccore = None

R1 = 2.2955922587175523
PLANAR_SEED = PlanarSeed.from_momentum(1.6204736990989952, 2.574869926521321)


def cases():
    col = CollinearSystem(1.0)
    pl = PlanarSystem(energy_from_seed(PLANAR_SEED))
    y_col = np.concatenate([initial_state(R1, 1.0), build_Y0_collinear().ravel()])
    y_pl = np.concatenate([PLANAR_SEED.state, np.eye(4).ravel()])
    tol = 1e-12
    common = (tol, tol, 1e-3, 1e-14, 0.5, 1_000_000)
    return {
        "collinear event (orbit only)":
            (col.kernel_id, col.kernel_params, y_col[:4], 50.0, *common, None, 0, -1, False),
        "collinear T/4 with variational":
            (col.kernel_id, col.kernel_params, y_col, 0.8173438998634992, *common, None, -1, 0, False),
        "planar T/8 with variational":
            (pl.kernel_id, pl.kernel_params, y_pl, 1.0, *common, None, -1, 0, False),
        "planar full period recorded":
            (pl.kernel_id, pl.kernel_params, y_pl[:4], 8.0, *common, None, -1, 0, True),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ccore is None:
        print("compiled core not built; only the Python kernel is available")
    print(f"{'case':<34} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8} {'max |diff|':>11}")
    for name, call in cases().items():
        t_py, out_py = best_of(_pycore.rkf45, call, max(1, args.repeat // 2))
        if _ccore is None:
            print(f"{name:<34} {1e3 * t_py:12.2f}")
            continue
        t_c, out_c = best_of(_ccore.rkf45, call, args.repeat)
        diff = float(np.max(np.abs(np.asarray(out_py[2]) - np.asarray(out_c[2]))))
        print(f"{name:<34} {1e3 * t_py:12.2f} {1e3 * t_c:12.3f} {t_py / t_c:8.0f} {diff:11.1e}")


if __name__ == "__main__":
    main()
