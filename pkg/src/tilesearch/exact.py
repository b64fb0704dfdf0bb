"""Exact k-nearest-neighbor search by full linear Hamming scan.

Distances are computed block by block so memory stays proportional to
k + block size, never N. Ties are broken by ascending row index, which makes
every search reproducible and oracle-testable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bitvec import BinaryFeature
from .store import FeatureStore

DEFAULT_BLOCK_ROWS = 1 << 18

# Distances fit in 10 bits; rows get the low 40. A single uint64 key makes
# (distance, row) lexicographic order a plain integer comparison.
_ROW_BITS = 40
_ROW_MASK = (1 << _ROW_BITS) - 1


@dataclass(frozen=True)
class QuerySpec:
    """One search request: what to look for and how many answers."""

    query: BinaryFeature
    k: int
    exclude_self: bool = False
    self_id: str | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class SearchResult:
    """One ranked answer: tile id, Hamming distance, 1-based rank."""

    id: str
    distance: int
    rank: int


def top_k_select(distances, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and values of the k smallest distances, ties by ascending index.

    Equivalent to a full sort + prefix but uses an O(n) partition, so n is
    never fully sorted when k << n. Returns (indices, distances), both sorted
    by (distance, index).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    distances = np.asarray(distances)
    if distances.ndim != 1:
        raise ValueError("distances must be one-dimensional")
    if not np.issubdtype(distances.dtype, np.integer):
        raise TypeError("distances must be integers")
    n = distances.shape[0]
    keys = (distances.astype(np.uint64) << _ROW_BITS) | np.arange(n, dtype=np.uint64)
    chosen = _smallest_keys(keys, k)
    return (chosen & _ROW_MASK).astype(np.int64), (chosen >> _ROW_BITS).astype(np.int64)


def _smallest_keys(keys: np.ndarray, k: int) -> np.ndarray:
    m = min(k, keys.shape[0])
    if m == 0:
        return keys[:0]
    if m < keys.shape[0]:
        keys = keys[np.argpartition(keys, m - 1)[:m]]
    return np.sort(keys)


def _block_keys(query_words: np.ndarray, words: np.ndarray, start: int, stop: int) -> np.ndarray:
    d = _kernels.hamming_scan(query_words, words[start:stop])
    return (d.astype(np.uint64) << _ROW_BITS) | np.arange(start, stop, dtype=np.uint64)


def brute_force_search(
    store: FeatureStore,
    spec: QuerySpec,
    block_rows: int = DEFAULT_BLOCK_ROWS,
    workers: int = 1,
) -> list[SearchResult]:
    """Scan every row of the store and return the k nearest tiles.

    The result set is exactly the k smallest distances over all N rows
    (ties by ascending row index). ``workers > 1`` splits blocks across
    threads; the merge is order-independent so the output is bit-identical
    to the serial scan.
    """
    if store.n == 0:
        return []
    exclude_row = -1
    if spec.exclude_self and spec.self_id is not None:
        if spec.self_id in store:
            exclude_row = store.row_of(spec.self_id)
    target = spec.k + (1 if exclude_row >= 0 else 0)

    query_words = spec.query.words()
    words = store.words
    spans = [(s, min(s + block_rows, store.n)) for s in range(0, store.n, block_rows)]

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda sp: _smallest_keys(_block_keys(query_words, words, *sp), target), spans)
            )
        best = _smallest_keys(np.concatenate(parts), target)
    else:
        best = np.empty(0, dtype=np.uint64)
        for span in spans:
            block_best = _smallest_keys(_block_keys(query_words, words, *span), target)
            best = _smallest_keys(np.concatenate([best, block_best]), target)

    return results_from_keys(store, best, spec.k, exclude_row)


def results_from_keys(
    store: FeatureStore, keys: np.ndarray, k: int, exclude_row: int = -1
) -> list[SearchResult]:
    """Decode sorted (distance, row) keys into ranked SearchResults."""
    rows = (keys & _ROW_MASK).astype(np.int64)
    dists = (keys >> _ROW_BITS).astype(np.int64)
    if exclude_row >= 0:
        keep = rows != exclude_row
        rows, dists = rows[keep], dists[keep]
    rows, dists = rows[:k], dists[:k]
    return [
        SearchResult(id=store.id_at(int(r)), distance=int(d), rank=rank)
        for rank, (r, d) in enumerate(zip(rows, dists), start=1)
    ]
