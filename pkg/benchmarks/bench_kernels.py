"""Compare the numba kernels against the numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

End-to-end solver timings under the fallback need a fresh interpreter with
PLAB_NO_NUMBA=1; the script launches one for the Crocco run.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from prandtl_lab import _accel

CROCCO_RUN = """
import time
from prandtl_lab.numerics import PeriodicGridX, build_grid
from prandtl_lab.shear import OuterFlow
from prandtl_lab import crocco
xg = PeriodicGridX(32); yg = build_grid(20.0, 256)
outer = OuterFlow.constant(xg)
u0, du0 = crocco.exponential_datum(xg, yg, 1.1, 0.1)
st = crocco.to_crocco(u0, outer, crocco.CroccoGrid(256, xg), du=du0)
crocco.run_crocco(st, 0.01, 0.002)
t = time.perf_counter()
crocco.run_crocco(st, 0.5, 0.002, store_every=1000)
print(time.perf_counter() - t)
"""


def bench(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def tridiagonal_case(m, n, rng):
    lo = rng.uniform(-1, 0, (m, n))
    up = rng.uniform(-1, 0, (m, n))
    di = 2.5 + rng.uniform(0, 1, (m, n))
    rhs = rng.standard_normal((m, n))
    return lo, di, up, rhs


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    rows = []
    for m, n in [(4, 256), (32, 256), (64, 512), (256, 1024)]:
        case = tridiagonal_case(m, n, rng)
        a = bench(_accel.thomas_batch_numpy, case, args.repeat)
        b = bench(_accel.thomas_batch_numba, case, args.repeat)
        diff = np.max(np.abs(_accel.thomas_batch_numpy(*case) - _accel.thomas_batch_numba(*case)))
        rows.append((f"thomas {m}x{n}", a, b, diff))
    for shape in [(32, 256), (256, 1024)]:
        wa = rng.uniform(0.1, 1.0, shape)
        wb = wa * rng.uniform(0.5, 1.5, shape)
        a = bench(_accel.log_mean_inverse_numpy, (wa, wb), args.repeat)
        b = bench(_accel.log_mean_inverse_numba, (wa, wb), args.repeat)
        diff = np.max(np.abs(_accel.log_mean_inverse_numpy(wa, wb) - _accel.log_mean_inverse_numba(wa, wb)))
        rows.append((f"log-mean {shape[0]}x{shape[1]}", a, b, diff))
    runs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, PLAB_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", CROCCO_RUN], env=env, capture_output=True, text=True, check=True)
        runs[flag] = float(out.stdout.strip())
    rows.append(("crocco 32x256, 250 steps", runs["1"], runs["0"], float("nan")))
    print(f"{'kernel':28s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, a, b, diff in rows:
        print(f"{name:28s} {1e3 * a:12.3f} {1e3 * b:12.3f} {a / b:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
