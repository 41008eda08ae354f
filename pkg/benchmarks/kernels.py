"""Compare the numba-compiled kernels against their pure-numpy fallbacks.

    python benchmarks/kernels.py [--sizes 8 32 128] [--reps 20]

Each kernel is called once per backend before timing so JIT compilation is
not counted. Results are also checked for agreement.
"""
import argparse
import time

import numpy as np

from classtrack import _backend
from classtrack.appearance import FeatureHistory, cosine_cost_matrix
from classtrack.assignment import solve_dense
from classtrack.geometry import ciou_matrix


def _best_of(fn, reps):
    fn()
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def _random_boxes(rng, n):
    xy = rng.uniform(0, 1000, size=(n, 2))
    wh = rng.uniform(10, 120, size=(n, 2))
    return np.hstack([xy, wh])


def _histories(rng, n, depth, dim):
    out = []
    for _ in range(n):
        h = FeatureHistory(capacity=depth)
        for v in rng.normal(size=(depth, dim)):
            h.push(v)
        out.append(h)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[8, 32, 128])
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if not _backend.HAS_NUMBA:
        print("numba is not installed; only the numpy backend can run")
        return

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<14}{'n':>6}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}  agree")
    for n in args.sizes:
        cost = rng.uniform(0, 10, size=(n, n))
        boxes_a, boxes_b = _random_boxes(rng, n), _random_boxes(rng, n)
        hist = _histories(rng, n, depth=10, dim=32)
        queries = rng.normal(size=(n, 32))
        cases = {
            "solve_dense": (lambda nb: solve_dense(cost, use_numba=nb), np.array_equal),
            "ciou_matrix": (lambda nb: ciou_matrix(boxes_a, boxes_b, use_numba=nb), np.allclose),
            "cosine_cost": (lambda nb: cosine_cost_matrix(hist, queries, use_numba=nb), np.allclose),
        }
        for name, (fn, same) in cases.items():
            t_nb = _best_of(lambda: fn(True), args.reps)
            t_np = _best_of(lambda: fn(False), args.reps)
            agree = same(fn(True), fn(False))
            print(f"{name:<14}{n:>6}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
