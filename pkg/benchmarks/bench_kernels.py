"""Time the numba and numpy variants of each kernel on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from newsvol import kernels
from newsvol._backend import BACKEND


def make_inputs(rng):
    n_days, per_day = 1000, 96
    returns = rng.standard_normal(n_days * per_day) * 1e-3
    offsets = np.arange(0, n_days * per_day + 1, per_day, dtype=np.int64)
    rv = rng.gamma(2.0, 1e-4, 5000)
    train_x = rng.standard_normal((460, 60))
    train_y = rng.integers(0, 2, 460).astype(np.int64)
    queries = rng.standard_normal((2048, 60))
    means = rng.standard_normal((2, 60))
    variances = rng.uniform(0.5, 2.0, (2, 60))
    log_priors = np.log([0.5, 0.5])
    w = rng.standard_normal(60) * 0.1
    y = train_y.astype(np.float64)
    return {
        "segment_sum_squares": (returns, offsets),
        "trailing_mean": (rv, 22, 22),
        "knn_proba": (train_x, train_y, queries, 5),
        "nb_joint_log_likelihood": (queries, means, variances, log_priors),
        "logistic_objective": (w, 0.1, train_x, y, 1.0),
    }


def best_of(func, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if BACKEND != "numba":
        print("numba unavailable; only the numpy variants would run")
        return
    inputs = make_inputs(np.random.default_rng(0))
    print(f"{'kernel':<26}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, call_args in inputs.items():
        nb = getattr(kernels, f"{name}_nb")
        np_impl = getattr(kernels, f"{name}_np")
        nb(*call_args)  # compile outside the timed region
        t_nb = best_of(nb, call_args, args.repeat)
        t_np = best_of(np_impl, call_args, args.repeat)
        print(f"{name:<26}{t_nb * 1e3:>10.2f}{t_np * 1e3:>10.2f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
