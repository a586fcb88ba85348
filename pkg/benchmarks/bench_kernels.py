"""Compare the compiled exhaustive-search kernel against the numpy reference.

Usage: python benchmarks/bench_kernels.py [--instances 2000] [--repeats 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from edgeoffload.kernels import HAVE_FAST, _ref
from edgeoffload.model import generate_instances
from edgeoffload.solvers import _instance_arrays

if HAVE_FAST:
    from edgeoffload.kernels import _fast


def _batch_arrays(n_vehicles: int, n_instances: int, seed: int):
    instances = generate_instances(n_vehicles, n_instances, seed=seed)
    local = np.empty((n_instances, n_vehicles))
    off_base = np.empty((n_instances, n_vehicles))
    sqrt_c = np.empty((n_instances, n_vehicles))
    wt_over_f = np.empty(n_instances)
    for i, inst in enumerate(instances):
        local[i], off_base[i], sqrt_c[i], wt_over_f[i] = _instance_arrays(inst)
    return local, off_base, sqrt_c, wt_over_f


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"compiled kernel available: {HAVE_FAST}")
    print(f"{'N':>3} {'ref (ms)':>10} {'fast (ms)':>10} {'speedup':>8}")
    for n in (2, 4, 6, 8, 10):
        arrays = _batch_arrays(n, args.instances, args.seed)
        t_ref = _time(lambda: _ref.exhaustive_argmin(*arrays), args.repeats)
        if HAVE_FAST:
            t_fast = _time(lambda: _fast.exhaustive_argmin(*arrays), args.repeats)
            ref_out = _ref.exhaustive_argmin(*arrays)
            fast_out = _fast.exhaustive_argmin(*arrays)
            assert np.array_equal(ref_out[0], fast_out[0]), "kernel outputs disagree"
            assert np.allclose(ref_out[1], fast_out[1], rtol=1e-12), "kernel costs disagree"
            print(f"{n:>3} {t_ref * 1e3:>10.2f} {t_fast * 1e3:>10.2f} {t_ref / t_fast:>8.1f}x")
        else:
            print(f"{n:>3} {t_ref * 1e3:>10.2f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
