"""Compiled kernels vs the numpy fallback.

    python benchmarks/bench_kernels.py [--n 200] [--p 2000] [--d 37] [--repeat 3]

Times the acor scan and one warm-started GRESH path on each backend and
checks that both agree.
"""

import argparse
import time

import numpy as np

from acorsis import _backend
from acorsis.core import standardize
from acorsis.penalize import ShrunkDesign, lambda_path_gic
from acorsis.screening import acor_all, shrunk_variable_set
from acorsis.simulate import gen_design, gen_response, rng_for


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=int, default=2000)
    ap.add_argument("--d", type=int, default=37)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    rng = rng_for(1, 0)
    X = gen_design(args.n, args.p, 0.0, rng)
    y, _ = gen_response("a", X, rng)
    ds = standardize(y, X)
    backends = ["python"] + (["cython"] if _backend.HAVE_COMPILED else [])

    print(f"n={args.n} p={args.p} d={args.d} threads={args.threads}")
    scans = {}
    for name in backends:
        t, sc = best_of(lambda: acor_all(ds, args.threads, backend=name), args.repeat)
        scans[name] = sc
        print(f"acor_all    {name:7s} {t:8.3f} s")
    if len(scans) == 2:
        a, b = scans["python"], scans["cython"]
        print(f"  max |score diff| {np.abs(a.scores - b.scores).max():.2e}, "
              f"partners equal {bool(np.array_equal(a.partner, b.partner))}")

    S = shrunk_variable_set(scans[backends[-1]], d=args.d)
    des = ShrunkDesign(ds, S.indices)
    paths = {}
    for name in backends:
        t, res = best_of(lambda: lambda_path_gic(ds, S, "gresh", design=des, backend=name),
                         1 if name == "python" else args.repeat)
        paths[name] = res
        print(f"gresh path  {name:7s} {t:8.3f} s  (chosen df {res.df[res.chosen]})")
    if len(paths) == 2:
        a, b = paths["python"], paths["cython"]
        print(f"  max |gic diff| {np.abs(a.gic - b.gic).max():.2e}, "
              f"same choice {a.chosen == b.chosen}")


if __name__ == "__main__":
    main()
