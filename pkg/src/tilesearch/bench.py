"""Benchmarks: numba kernels vs the numpy fallback, and LSH vs brute force.

Run via ``tilesearch bench``. The scan benchmark reports single-threaded
vectors/second for every available backend on synthetic corpora; the search
benchmark compares end-to-end brute-force and LSH query latency on one
corpus at equal k.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bitvec import FEATURE_WORDS
from .exact import QuerySpec, brute_force_search
from .lsh import build_index, lsh_search, make_family
from .store import FeatureStore


@dataclass(frozen=True)
class ScanRate:
    backend: str
    n_vectors: int
    seconds_per_scan: float

    @property
    def vectors_per_second(self) -> float:
        return self.n_vectors / self.seconds_per_scan


def random_corpus(n: int, seed: int = 0) -> FeatureStore:
    """In-memory store of n random vectors with synthetic ids."""
    rng = np.random.default_rng(seed)
    vectors = rng.integers(0, 256, size=(n, 64), dtype=np.uint8)
    ids = np.char.add(b"v", np.arange(n).astype(np.bytes_))
    return FeatureStore.from_arrays(ids, vectors, validate=False)


def bench_scan(n: int = 2_000_000, repeats: int = 3, seed: int = 0) -> list[ScanRate]:
    """Best-of-``repeats`` full-scan rate for each backend."""
    rng = np.random.default_rng(seed)
    block = rng.integers(0, 2**64, size=(n, FEATURE_WORDS), dtype=np.uint64)
    query = np.ascontiguousarray(block[n // 2])
    rates = []
    for name, (scan, _) in sorted(_kernels.implementations().items()):
        scan(query, block[:1024])  # JIT warm-up / page touch
        best = min(_time_once(scan, query, block) for _ in range(repeats))
        rates.append(ScanRate(backend=name, n_vectors=n, seconds_per_scan=best))
    return rates


def _time_once(scan, query, block) -> float:
    t0 = time.perf_counter()
    scan(query, block)
    return time.perf_counter() - t0


@dataclass(frozen=True)
class SearchComparison:
    n_vectors: int
    k: int
    queries: int
    brute_median_s: float
    lsh_median_s: float
    index_build_s: float

    @property
    def speedup(self) -> float:
        return self.brute_median_s / self.lsh_median_s


def bench_search(
    n: int = 1_000_000, k: int = 30, queries: int = 20, seed: int = 0
) -> SearchComparison:
    """Median per-query latency of brute force vs LSH on one random corpus."""
    store = random_corpus(n, seed)
    t0 = time.perf_counter()
    index = build_index(store, make_family(seed))
    build_s = time.perf_counter() - t0

    rng = np.random.default_rng(seed + 1)
    rows = rng.integers(0, n, size=queries)
    specs = [QuerySpec(query=store.feature_at(int(r)), k=k) for r in rows]

    brute_times, lsh_times = [], []
    for spec in specs:
        t0 = time.perf_counter()
        brute_force_search(store, spec)
        brute_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        lsh_search(index, store, spec)
        lsh_times.append(time.perf_counter() - t0)

    return SearchComparison(
        n_vectors=n,
        k=k,
        queries=queries,
        brute_median_s=float(np.median(brute_times)),
        lsh_median_s=float(np.median(lsh_times)),
        index_build_s=build_s,
    )


def format_report(rates: list[ScanRate], comparison: SearchComparison | None) -> str:
    lines = [f"active backend: {_kernels.BACKEND}"]
    for r in rates:
        lines.append(
            f"scan[{r.backend:>5}]: {r.n_vectors:,} vectors in "
            f"{r.seconds_per_scan * 1e3:8.1f} ms -> {r.vectors_per_second / 1e6:8.1f} M vec/s"
        )
    if len(rates) == 2:
        by_name = {r.backend: r for r in rates}
        if "numba" in by_name and "numpy" in by_name:
            ratio = by_name["numpy"].seconds_per_scan / by_name["numba"].seconds_per_scan
            lines.append(f"numba speedup over numpy fallback: {ratio:.1f}x")
    if comparison is not None:
        lines.append(
            f"search n={comparison.n_vectors:,} k={comparison.k}: "
            f"brute median {comparison.brute_median_s * 1e3:.2f} ms, "
            f"lsh median {comparison.lsh_median_s * 1e3:.2f} ms "
            f"({comparison.speedup:.1f}x), index build {comparison.index_build_s:.1f} s"
        )
    return "\n".join(lines)
