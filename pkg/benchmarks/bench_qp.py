"""Compare the compiled and pure-Python active-set kernels.

Usage::

    python3 benchmarks/bench_qp.py [--repeats 20] [--sizes 10,20,40,80]

Each size solves the same seeded split-variable lasso QPs with both
backends and reports the median time per solve and the largest difference
between the two solutions.
"""

import argparse
import statistics
import time

import numpy as np

from priorlasso.qp import KERNELS, QpOptions, QpProblem, solve_qp


def lasso_qp(rng, p, n=None):
    n = n or 2 * p
    X = rng.standard_normal((n, p))
    y = X @ rng.normal(0.0, 1.0, p) + rng.standard_normal(n)
    G = X.T @ X
    h = X.T @ y
    Q = 2.0 * np.block([[G, -G], [-G, G]])
    c = np.concatenate([-2.0 * h, 2.0 * h])
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    s = 0.5 * np.abs(ols).sum()
    # budget row plus a few ordering rows b_j <= b_{j+1}
    rows = [np.ones(2 * p)]
    rhs = [s]
    for j in range(min(3, p - 1)):
        r = np.zeros(p)
        r[j], r[j + 1] = 1.0, -1.0
        rows.append(np.concatenate([r, -r]))
        rhs.append(0.0)
    return QpProblem(Q, c, np.array(rows), np.array(rhs), lower_bounds=np.zeros(2 * p))


def bench(size, repeats, seed=0):
    problems = [lasso_qp(np.random.default_rng(seed + k), size) for k in range(repeats)]
    out = {}
    xs = {}
    for backend in sorted(KERNELS):
        opts = QpOptions(backend=backend)
        times = []
        xs[backend] = []
        for prob in problems:
            t0 = time.perf_counter()
            sol = solve_qp(prob, opts=opts)
            times.append(time.perf_counter() - t0)
            xs[backend].append(sol.x)
        out[backend] = statistics.median(times)
    diff = 0.0
    if len(xs) == 2:
        a, b = xs.values()
        diff = max(float(np.max(np.abs(u - v))) for u, v in zip(a, b))
    return out, diff


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--sizes", default="10,20,40,80")
    args = ap.parse_args()
    if "cython" not in KERNELS:
        print("compiled kernel not built; timing the Python kernel only")
    print(f"{'p':>4} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max |dx|':>10}")
    for p in (int(t) for t in args.sizes.split(",")):
        t, diff = bench(p, args.repeats)
        py = t["python"] * 1e3
        cy = t.get("cython", float("nan")) * 1e3
        print(f"{p:>4} {py:>10.3f} {cy:>10.3f} {py / cy:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
