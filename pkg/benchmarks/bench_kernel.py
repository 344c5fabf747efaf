"""Timing comparison between the compiled and interpreted kernels.

Both backends run the same source statements, so this measures pure
dispatch overhead: scalar special functions, binning, split search, and
full tree growth.  A final line times the end-to-end permutation scoring
pipeline on the active backend for context.

Usage:
    python3 benchmarks/bench_kernel.py [--sizes 400,2000] [--repeats 3]
"""

import argparse
import time
from statistics import median

import numpy as np

from varimp import _kernels as active
from varimp.backend import backend_name, load_pure_kernels
from varimp.importance import bias_adjusted
from varimp.simbench import gen_predictors, gen_response, make_dataset
from varimp.tree import TreeConfig


def bench(fn, repeats):
    """Median wall time of ``fn()`` over ``repeats`` runs."""
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return median(times)


def dataset(n, seed=0):
    rng = np.random.default_rng(seed)
    pred = gen_predictors(n, rng)
    return make_dataset(pred, gen_response("E1", pred, rng))


def workloads(sizes):
    """Yield (label, callable-factory) pairs; factory binds one backend."""
    stats = np.geomspace(1e-3, 60.0, 20_000)

    def tail(kern):
        return lambda: [kern.chisq_tail(float(s), 1) for s in stats[:4000]]

    yield "chisq_tail x4000", tail

    ps = np.geomspace(1e-12, 0.999, 4000)
    logs = np.log(ps)

    def quant(kern):
        return lambda: [kern.chisq1_quantile(float(p), float(lp))
                        for p, lp in zip(ps, logs)]

    yield "chisq1_quantile x4000", quant

    rng = np.random.default_rng(1)
    col = rng.standard_normal(50_000)
    col[rng.random(50_000) < 0.05] = np.nan

    def codes(kern):
        return lambda: kern.quantile_codes(col, 4)

    yield "quantile_codes n=50000", codes

    for n in sizes:
        ds = dataset(n)
        rows = np.arange(n, dtype=np.intp)

        def split(kern, ds=ds, rows=rows, n=n):
            return lambda: kern.best_split_rows(
                ds.X, 0, False, 0, ds.y, rows, 0, n, 2, False)

        yield f"best_split_rows n={n}", split

        def tree(kern, ds=ds):
            return lambda: kern.grow_tree(ds.X, ds.iscat, ds.nlev, ds.y,
                                          4, 8, 2)

        yield f"grow_tree n={n} K=11", tree


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sizes", default="400,2000",
                        help="comma-separated dataset sizes")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--b", type=int, default=100,
                        help="permutations for the pipeline timing")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    pure = load_pure_kernels()
    if pure is active:
        print("note: compiled backend unavailable; comparing the "
              "interpreted kernel against itself")
    print(f"active backend: {backend_name()}\n")
    header = f"{'workload':28s} {'compiled':>10s} {'pure':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, factory in workloads(sizes):
        t_fast = bench(factory(active), args.repeats)
        t_pure = bench(factory(pure), args.repeats)
        print(f"{label:28s} {t_fast:9.4f}s {t_pure:9.4f}s "
              f"{t_pure / t_fast:7.1f}x")

    ds = dataset(sizes[0])
    t_pipe = bench(lambda: bias_adjusted(ds, TreeConfig(), B=args.b, seed=0),
                   args.repeats)
    print(f"\nbias_adjusted pipeline (n={sizes[0]}, B={args.b}, "
          f"{backend_name()}): {t_pipe:.3f}s")


if __name__ == "__main__":
    main()
