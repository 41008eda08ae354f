"""Square linear assignment with dummy padding.

Rectangular prediction x detection cost blocks are padded to a square matrix
whose extra rows/columns all carry one dummy cost ``V = max(block) + k``.
The padded problem is solved with a shortest-augmenting-path Kuhn-Munkres
(O(n^3)); among equal-cost optima the lexicographically smallest permutation
(lowest row first, then lowest column) is returned so results are
reproducible.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._backend import USE_NUMBA, njit

__all__ = [
    "CostMatrix",
    "Assignment",
    "CostInputError",
    "ParameterError",
    "SizeError",
    "pad_costs",
    "pad_costs_masked",
    "solve",
    "brute_force_solve",
    "solve_dense",
    "step_count_model",
    "BRUTE_FORCE_MAX_N",
]

BRUTE_FORCE_MAX_N = 9


class CostInputError(ValueError):
    """Raised for negative, non-finite or mis-shaped cost input."""


class ParameterError(ValueError):
    """Raised for an out-of-range solver parameter."""


class SizeError(ValueError):
    """Raised when a problem is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class CostMatrix:
    """Square cost matrix; rows ``>= real_rows`` and cols ``>= real_cols`` are dummies."""

    values: np.ndarray
    real_rows: int
    real_cols: int
    dummy_value: float

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise CostInputError(f"cost matrix must be square, got shape {v.shape}")
        if v.shape[0] != max(self.real_rows, self.real_cols):
            raise CostInputError(
                f"dimension {v.shape[0]} != max({self.real_rows}, {self.real_cols})"
            )

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    total_cost: float
    matches: tuple[tuple[int, int], ...] = field(default=())
    unmatched_predictions: tuple[int, ...] = field(default=())
    unmatched_detections: tuple[int, ...] = field(default=())


def pad_costs(raw, k: float = 1.0) -> CostMatrix:
    """Pad a ``p x d`` block of non-negative costs to ``max(p, d)`` square.

    Every padding entry equals ``max(raw) + k``; when one side of the block is
    empty the dummy value is just ``k``.
    """
    if not (k > 0) or not np.isfinite(k):
        raise ParameterError(f"padding constant k must be positive and finite, got {k}")
    block = np.asarray(raw, dtype=np.float64)
    if block.ndim != 2:
        raise CostInputError(f"expected a 2-D cost block, got {block.ndim}-D")
    p, d = block.shape
    if p == 0 and d == 0:
        raise CostInputError("cost block is empty on both sides")
    if block.size:
        if not np.all(np.isfinite(block)):
            raise CostInputError("cost block contains non-finite entries")
        if np.any(block < 0):
            raise CostInputError("cost block contains negative entries")
        dummy = float(block.max()) + k
    else:
        dummy = float(k)
    n = max(p, d)
    if p == d:
        values = block.copy()
    else:
        values = np.full((n, n), dummy, dtype=np.float64)
        values[:p, :d] = block
    return CostMatrix(values=values, real_rows=p, real_cols=d, dummy_value=dummy)


def pad_costs_masked(raw, admissible, k: float = 1.0) -> CostMatrix:
    """Pad like :func:`pad_costs`, also forcing inadmissible entries to ``V``.

    ``V`` is computed over the admissible entries only. This is how a single
    monolithic matrix spanning several object classes encodes "never pair
    across classes" without changing the per-class optima.
    """
    block = np.array(raw, dtype=np.float64)
    mask = np.asarray(admissible, dtype=bool)
    if mask.shape != block.shape:
        raise CostInputError(f"mask shape {mask.shape} != cost shape {block.shape}")
    allowed = block[mask]
    if allowed.size and (not np.all(np.isfinite(allowed)) or np.any(allowed < 0)):
        raise CostInputError("admissible costs must be finite and non-negative")
    if not (k > 0) or not np.isfinite(k):
        raise ParameterError(f"padding constant k must be positive and finite, got {k}")
    p, d = block.shape
    if p == 0 and d == 0:
        raise CostInputError("cost block is empty on both sides")
    dummy = (float(allowed.max()) if allowed.size else 0.0) + k
    block[~mask] = dummy
    n = max(p, d)
    values = np.full((n, n), dummy, dtype=np.float64)
    values[:p, :d] = block
    return CostMatrix(values=values, real_rows=p, real_cols=d, dummy_value=dummy)


# ---------------------------------------------------------------------------
# kernels

@njit
def _kuhn_munkres_loops(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.zeros(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_for_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_for_row[p[j] - 1] = j - 1
    return col_for_row, u[1:].copy(), v[1:].copy()


def _kuhn_munkres_numpy(cost):
    # Same algorithm with the column scan vectorised.
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_for_row = np.empty(n, dtype=np.int64)
    col_for_row[p[1:] - 1] = np.arange(n)
    return col_for_row, u[1:].copy(), v[1:].copy()


@njit
def _lexicographic_optimum_loops(cost, u, v, col_for_row, tol):
    # Walk rows in order; give each row the lowest column that still admits a
    # perfect matching on the tight (zero reduced cost) subgraph.
    n = cost.shape[0]
    tight = np.empty((n, n), dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            tight[i, j] = cost[i, j] - u[i] - v[j] <= tol
    col_for_row = col_for_row.copy()
    row_for_col = np.empty(n, dtype=np.int64)
    for i in range(n):
        row_for_col[col_for_row[i]] = i
    fixed_col = np.zeros(n, dtype=np.bool_)
    prev_row = np.empty(n, dtype=np.int64)
    visited = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n + 1, dtype=np.int64)
    for i in range(n):
        target = col_for_row[i]
        for j in range(n):
            if j == target:
                break
            if fixed_col[j] or not tight[i, j]:
                continue
            # Row r loses column j; look for an alternating path from r to the
            # column row i releases.
            r = row_for_col[j]
            visited[:] = False
            head = 0
            tail = 1
            queue[0] = r
            found = False
            while head < tail and not found:
                x = queue[head]
                head += 1
                for c in range(n):
                    if visited[c] or fixed_col[c] or c == j or not tight[x, c]:
                        continue
                    visited[c] = True
                    prev_row[c] = x
                    if c == target:
                        found = True
                        break
                    queue[tail] = row_for_col[c]
                    tail += 1
            if found:
                c = target
                while True:
                    x = prev_row[c]
                    old = col_for_row[x]
                    col_for_row[x] = c
                    row_for_col[c] = x
                    if x == r:
                        break
                    c = old
                col_for_row[i] = j
                row_for_col[j] = i
                break
        fixed_col[col_for_row[i]] = True
    return col_for_row


_lexicographic_optimum_py = getattr(
    _lexicographic_optimum_loops, "py_func", _lexicographic_optimum_loops
)


def _tie_tolerance(cost: np.ndarray) -> float:
    scale = float(np.abs(cost).max()) if cost.size else 0.0
    return 1e-11 * max(1.0, scale)


def solve_dense(cost: np.ndarray, *, use_numba: bool | None = None) -> np.ndarray:
    """Optimal column index for each row of a square float64 matrix.

    This is the bare kernel entry point used on hot paths; it performs no
    validation beyond squareness.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.ndim != 2 or cost.shape[1] != n:
        raise CostInputError(f"cost matrix must be square, got shape {cost.shape}")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        cols, u, v = _kuhn_munkres_loops(cost)
        return _lexicographic_optimum_loops(cost, u, v, cols, _tie_tolerance(cost))
    cols, u, v = _kuhn_munkres_numpy(cost)
    tol = _tie_tolerance(cost)
    if np.count_nonzero(cost - u[:, None] - v[None, :] <= tol) <= n:
        # no tied alternative to the matching found
        return cols
    return _lexicographic_optimum_py(cost, u, v, cols, tol)


def _build_assignment(matrix: CostMatrix, col_for_row: np.ndarray) -> Assignment:
    pairs = tuple((int(r), int(c)) for r, c in enumerate(col_for_row))
    values = matrix.values
    total = float(sum(values[r, c] for r, c in pairs))
    p, d = matrix.real_rows, matrix.real_cols
    matches = tuple((r, c) for r, c in pairs if r < p and c < d)
    unmatched_predictions = tuple(r for r, c in pairs if r < p and c >= d)
    unmatched_detections = tuple(c for r, c in pairs if c < d and r >= p)
    return Assignment(
        pairs=pairs,
        total_cost=total,
        matches=matches,
        unmatched_predictions=unmatched_predictions,
        unmatched_detections=unmatched_detections,
    )


def solve(matrix: CostMatrix) -> Assignment:
    """Minimum-cost permutation of a padded cost matrix."""
    return _build_assignment(matrix, solve_dense(matrix.values))


def brute_force_solve(matrix: CostMatrix) -> Assignment:
    """Exhaustive reference solver (``n <= 9``), same tie-break as :func:`solve`."""
    n = matrix.n
    if n > BRUTE_FORCE_MAX_N:
        raise SizeError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    if n == 0:
        return _build_assignment(matrix, np.empty(0, dtype=np.int64))
    # itertools yields permutations in lexicographic order, so the first
    # minimum is also the tie-break winner.
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    totals = matrix.values[np.arange(n), perms].sum(axis=1)
    best = totals.min()
    winner = int(np.flatnonzero(totals <= best + n * _tie_tolerance(matrix.values))[0])
    return _build_assignment(matrix, perms[winner])


def step_count_model(class_sizes) -> tuple[int, int, int]:
    """Cubic work estimates: (monolithic, partitioned sequential, partitioned parallel)."""
    sizes = [int(s) for s in class_sizes]
    if any(s < 0 for s in sizes):
        raise CostInputError(f"class sizes must be non-negative, got {sizes}")
    if not any(sizes):
        raise CostInputError("at least one class size must be positive")
    cubes = [s ** 3 for s in sizes]
    return sum(sizes) ** 3, sum(cubes), max(cubes)
