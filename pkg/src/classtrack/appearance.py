"""Per-track appearance history and the max-cosine matching cost."""
from __future__ import annotations

from collections import deque

import numpy as np

from ._backend import USE_NUMBA, njit

__all__ = [
    "FeatureHistory",
    "EmptyHistoryError",
    "push",
    "cosine_cost",
    "cosine_cost_matrix",
]


class EmptyHistoryError(RuntimeError):
    """Appearance cost requested for a track with no stored features."""


def _check_vector(f, dim: int | None) -> np.ndarray:
    vec = np.asarray(f, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"embedding must be a 1-D vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise ValueError(f"embedding dimension {vec.shape[0]} != history dimension {dim}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding contains non-finite values")
    if not np.any(vec):
        raise ValueError("zero-norm embedding")
    return vec


class FeatureHistory:
    """Bounded FIFO of embeddings; the oldest entry is evicted when full."""

    def __init__(self, capacity: int = 50, dim: int | None = None):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.dim = dim
        self._entries: deque[np.ndarray] = deque(maxlen=self.capacity)
        self._stacked: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    @property
    def entries(self) -> list[np.ndarray]:
        return list(self._entries)

    def push(self, f) -> "FeatureHistory":
        vec = _check_vector(f, self.dim)
        if self.dim is None:
            self.dim = vec.shape[0]
        self._entries.append(vec.copy())
        self._stacked = None
        return self

    def as_array(self) -> np.ndarray:
        """Entries stacked oldest-first as an ``(len, dim)`` array."""
        if self._stacked is None:
            if self._entries:
                self._stacked = np.vstack(self._entries)
            else:
                self._stacked = np.empty((0, self.dim or 0))
        return self._stacked


def push(history: FeatureHistory, f) -> FeatureHistory:
    return history.push(f)


def cosine_cost(history: FeatureHistory, f_j) -> float:
    """``1 - max_k cos(entry_k, f_j)`` over the stored entries, in [0, 2]."""
    if len(history) == 0:
        raise EmptyHistoryError("appearance cost needs at least one stored feature")
    query = _check_vector(f_j, history.dim)
    entries = history.as_array()
    sims = entries @ query / (np.linalg.norm(entries, axis=1) * np.linalg.norm(query))
    return float(np.clip(1.0 - sims.max(), 0.0, 2.0))


# ---------------------------------------------------------------------------
# batched kernel: many histories against many detections

@njit
def _segment_max_cosine_loops(entries, offsets, queries):
    n_tracks = offsets.shape[0] - 1
    n_queries = queries.shape[0]
    dim = queries.shape[1]
    q_norm = np.empty(n_queries)
    for j in range(n_queries):
        s = 0.0
        for k in range(dim):
            s += queries[j, k] * queries[j, k]
        q_norm[j] = np.sqrt(s)
    out = np.full((n_tracks, n_queries), 2.0)
    for i in range(n_tracks):
        for e in range(offsets[i], offsets[i + 1]):
            s = 0.0
            for k in range(dim):
                s += entries[e, k] * entries[e, k]
            e_norm = np.sqrt(s)
            for j in range(n_queries):
                dot = 0.0
                for k in range(dim):
                    dot += entries[e, k] * queries[j, k]
                cost = 1.0 - dot / (e_norm * q_norm[j])
                if cost < out[i, j]:
                    out[i, j] = cost
    for i in range(n_tracks):
        for j in range(n_queries):
            out[i, j] = min(max(out[i, j], 0.0), 2.0)
    return out


def _segment_max_cosine_numpy(entries, offsets, queries):
    e = entries / np.linalg.norm(entries, axis=1, keepdims=True)
    q = queries / np.linalg.norm(queries, axis=1, keepdims=True)
    sims = e @ q.T
    best = np.maximum.reduceat(sims, offsets[:-1], axis=0)
    return np.clip(1.0 - best, 0.0, 2.0)


def cosine_cost_matrix(histories, queries, *, use_numba: bool | None = None) -> np.ndarray:
    """Cost of every history against every query embedding, shape ``(p, d)``.

    Every history must be non-empty.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    p = len(histories)
    d = queries.shape[0] if queries.ndim == 2 else 0
    if p == 0 or d == 0:
        return np.empty((p, d))
    lengths = [len(h) for h in histories]
    if min(lengths) == 0:
        raise EmptyHistoryError("appearance cost needs at least one stored feature")
    offsets = np.zeros(p + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    entries = np.ascontiguousarray(np.vstack([h.as_array() for h in histories]))
    if entries.shape[1] != queries.shape[1]:
        raise ValueError(
            f"embedding dimension {queries.shape[1]} != history dimension {entries.shape[1]}"
        )
    if USE_NUMBA if use_numba is None else use_numba:
        return _segment_max_cosine_loops(entries, offsets, queries)
    return _segment_max_cosine_numpy(entries, offsets, queries)
