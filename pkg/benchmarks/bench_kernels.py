#!/usr/bin/env python3
"""Time the numba kernels against their numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--repeat 20] [--n 5000]

The first numba call per kernel is a warm-up (compilation or cache load) and
is reported separately. Results are also checked for agreement.
"""

import argparse
import time

import numpy as np

from readens import _accel, _kernels


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, d, seed=0):
    rng = np.random.default_rng(seed)
    gold, pred = rng.integers(0, 19, n), rng.integers(0, 19, n)
    conf = _kernels.confusion_matrix_numpy(gold, pred, 19)
    x = rng.standard_normal((n, d))
    labels = rng.integers(1, 20, n)
    item_w = rng.uniform(0.5, 2.0, n)
    return {
        "confusion_matrix": (gold, pred, 19),
        "quadratic_disagreement": (conf,),
        "coral_loss_grad": (x, labels, rng.standard_normal(d), np.linspace(2, -2, 18), item_w),
        "ce_loss_grad": (x, labels - 1, rng.standard_normal((d, 19)), np.zeros(19), item_w),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    if not _accel.HAVE_NUMBA:
        print("numba backend disabled or unavailable; nothing to compare")
        return 0
    print(f"n={args.n} d={args.d} repeat={args.repeat}")
    print(f"{'kernel':<24}{'warm-up':>10}{'numpy':>12}{'numba':>12}{'speedup':>9}  agree")
    for name, call_args in cases(args.n, args.d).items():
        np_fn = getattr(_kernels, f"{name}_numpy")
        nb_fn = getattr(_kernels, f"{name}_numba")
        t0 = time.perf_counter()
        nb_out = nb_fn(*call_args)
        warm = time.perf_counter() - t0
        np_out = np_fn(*call_args)
        pairs = zip(nb_out, np_out) if isinstance(np_out, tuple) else [(nb_out, np_out)]
        agree = all(np.allclose(a, b, rtol=1e-12, atol=1e-14) for a, b in pairs)
        t_np = best_of(np_fn, call_args, args.repeat)
        t_nb = best_of(nb_fn, call_args, args.repeat)
        print(f"{name:<24}{warm * 1e3:>8.1f}ms{t_np * 1e6:>10.1f}us{t_nb * 1e6:>10.1f}us"
              f"{t_np / t_nb:>8.2f}x  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
