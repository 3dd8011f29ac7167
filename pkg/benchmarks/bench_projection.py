"""Time the compiled and pure-Python root-finding kernels on random projections.

    python benchmarks/bench_projection.py --sizes 100 1000 10000 100000 --repeats 5
"""

import argparse
import time

import numpy as np

from hingegap import projection
from hingegap.projection import SeparableQpProblem, TransformedQp, find_root_median, solve_sorted_oracle


def random_problem(n, rng):
    sigma = rng.choice([-1.0, 1.0], n) * rng.uniform(0.5, 2.0, n)
    l = rng.uniform(-1.0, 0.0, n)
    u = l + rng.uniform(0.1, 2.0, n)
    lo = np.sum(np.where(sigma > 0, sigma * l, sigma * u))
    hi = np.sum(np.where(sigma > 0, sigma * u, sigma * l))
    z = lo + rng.uniform(0.2, 0.8) * (hi - lo)
    return SeparableQpProblem(d=rng.uniform(0.5, 2.0, n), m=rng.normal(size=n), l=l, u=u,
                              sigma=sigma, z=z)


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 10_000, 100_000])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--median", choices=projection.MEDIAN_METHODS, default="quickselect")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    backends = sorted(projection.KERNELS)
    if "compiled" not in backends:
        print("compiled kernel not built; timing the python fallback only")
    header = f"{'n':>8} " + " ".join(f"{b + ' [ms]':>15}" for b in backends) + f" {'sort [ms]':>12}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for n in args.sizes:
        p = random_problem(n, rng)
        tq = TransformedQp.from_problem(p)
        row = {}
        for b in backends:
            row[b] = best_of(lambda: find_root_median(tq, args.median, backend=b), args.repeats)
        t_sort = best_of(lambda: solve_sorted_oracle(p), args.repeats)
        line = f"{n:>8} " + " ".join(f"{1e3 * row[b]:>15.3f}" for b in backends) + f" {1e3 * t_sort:>12.3f}"
        if len(backends) == 2:
            line += f" {row['python'] / row['compiled']:>8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
