"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeats N]

Also times a full GES run on each path; the kernel choice is read from
``WHATIF_NO_NUMBA`` at import time, so that part runs in subprocesses.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from whatif import _accel


def _best_of(fn, repeats):
    fn()  # warm-up (includes JIT compilation on the numba path)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_residual_variance(repeats):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2000, 30))
    cov = np.cov(x, rowvar=False, bias=True)
    queries = [(int(rng.integers(30)), rng.choice(30, size=int(rng.integers(0, 6)), replace=False)) for _ in range(2000)]
    queries = [(y, np.array(sorted(set(pa) - {y}), dtype=np.int64)) for y, pa in queries]

    def run(kernel):
        return lambda: [kernel(cov, y, pa) for y, pa in queries]

    return {
        "numpy": _best_of(run(_accel._residual_variance_np), repeats),
        "numba": _best_of(run(lambda c, y, pa: _accel._residual_variance_nb(c, np.int64(y), pa)), repeats),
    }


def bench_resample(repeats):
    rng = np.random.default_rng(1)
    hi = rng.integers(1, 8, size=(900, 124)).astype(float)
    lo = rng.integers(1, 8, size=(700, 124)).astype(float)
    idx_hi = np.stack([rng.choice(900, 700, replace=False) for _ in range(1000)])
    idx_lo = np.stack([rng.choice(700, 700, replace=False) for _ in range(1000)])
    return {
        "numpy": _best_of(lambda: _accel._resample_diffs_np(hi, lo, idx_hi, idx_lo), repeats),
        "numba": _best_of(lambda: _accel._resample_diffs_nb(hi, lo, idx_hi, idx_lo), repeats),
    }


GES_SNIPPET = """
import time
from whatif.ges import run_ges
from whatif.ingest import standardize
from whatif.synth import random_dag, random_scm, sample
data = standardize(sample(random_scm(random_dag(20, 2.0, 0), 1), 5000, 2))
run_ges(data)
start = time.perf_counter()
run_ges(data)
print(time.perf_counter() - start)
"""


def bench_ges():
    out = {}
    for label, flag in (("numpy", "1"), ("numba", "0")):
        env = dict(os.environ, WHATIF_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", GES_SNIPPET], env=env, capture_output=True, text=True, check=True)
        out[label] = float(res.stdout.strip())
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return 1
    rows = [
        ("residual_variance x2000 (p=30)", bench_residual_variance(args.repeats)),
        ("resample_mean_diffs (1000 x 700 x 124)", bench_resample(args.repeats)),
        ("run_ges p=20 n=5000", bench_ges()),
    ]
    print(f"{'kernel':42s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for name, t in rows:
        print(f"{name:42s} {t['numpy']:10.4f} {t['numba']:10.4f} {t['numpy'] / t['numba']:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
