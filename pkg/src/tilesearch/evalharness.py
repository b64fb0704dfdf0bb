"""Evaluation harnesses: LSH recall/latency and labeled-corpus precision.

``lsh_evaluation`` reports recall@k against the exact engine plus latency
percentiles, with the analytic recall prediction from the measured exact
top-k distances alongside for comparison.

``precision_evaluation`` is the synthetic analog of manual top-k precision
scoring on a labeled corpus: planted classes of near-duplicate codes, where
a result is a true positive when it shares the query's class. It exists for
regression tracking on synthetic data only; nothing here claims real-imagery
precision numbers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .exact import QuerySpec, brute_force_search
from .lsh import LshIndex, build_index, lsh_search, make_family, predicted_recall
from .store import FeatureStore


@dataclass(frozen=True)
class LshEvaluation:
    queries: int
    k: int
    recall_at_k: float
    predicted_recall_at_k: float
    latency_p50_ms: float
    latency_p90_ms: float
    latency_p99_ms: float


def lsh_evaluation(
    store: FeatureStore,
    index: LshIndex,
    n_queries: int,
    k: int,
    seed: int = 0,
) -> LshEvaluation:
    """Query ``n_queries`` indexed vectors; measure recall@k and latency."""
    if store.n == 0:
        raise ValueError("store is empty")
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, store.n, size=n_queries)

    latencies = []
    recall_sum = 0.0
    exact_distances: list[int] = []
    for r in rows:
        spec = QuerySpec(query=store.feature_at(int(r)), k=k)
        exact = brute_force_search(store, spec)
        t0 = time.perf_counter()
        approx = lsh_search(index, store, spec)
        latencies.append(time.perf_counter() - t0)
        exact_ids = {res.id for res in exact}
        approx_ids = {res.id for res in approx}
        recall_sum += len(exact_ids & approx_ids) / k
        exact_distances.extend(res.distance for res in exact)

    lat_ms = np.asarray(latencies) * 1e3
    return LshEvaluation(
        queries=n_queries,
        k=k,
        recall_at_k=recall_sum / n_queries,
        predicted_recall_at_k=predicted_recall(
            exact_distances, index.family.tables, index.family.bits_per_key
        ),
        latency_p50_ms=float(np.percentile(lat_ms, 50)),
        latency_p90_ms=float(np.percentile(lat_ms, 90)),
        latency_p99_ms=float(np.percentile(lat_ms, 99)),
    )


@dataclass(frozen=True)
class PrecisionEvaluation:
    classes: int
    members_per_class: int
    k: int
    precision_exact: float
    precision_lsh: float


def make_labeled_corpus(
    classes: int, members_per_class: int, flips: int, seed: int = 0
) -> tuple[FeatureStore, np.ndarray]:
    """Corpus of planted classes: each member is its class center with
    ``flips`` random bits flipped. Returns (store, labels)."""
    rng = np.random.default_rng(seed)
    n = classes * members_per_class
    vectors = np.empty((n, 64), dtype=np.uint8)
    labels = np.repeat(np.arange(classes), members_per_class)
    for c in range(classes):
        center = np.frombuffer(rng.bytes(64), dtype=np.uint8)
        for m in range(members_per_class):
            member = np.unpackbits(center, bitorder="little")
            positions = rng.choice(512, size=flips, replace=False)
            member[positions] ^= 1
            vectors[c * members_per_class + m] = np.packbits(member, bitorder="little")
    ids = [f"c{labels[i]}_m{i % members_per_class}" for i in range(n)]
    return FeatureStore.from_arrays(ids, vectors), labels


def precision_evaluation(
    classes: int = 20,
    members_per_class: int = 50,
    flips: int = 32,
    k: int = 30,
    n_queries: int = 40,
    seed: int = 0,
) -> PrecisionEvaluation:
    """Mean top-k precision (same-class fraction, self excluded) per engine."""
    store, labels = make_labeled_corpus(classes, members_per_class, flips, seed)
    index = build_index(store, make_family(seed))
    rng = np.random.default_rng(seed + 1)
    rows = rng.integers(0, store.n, size=n_queries)

    def precision(results, query_row: int) -> float:
        if not results:
            return 0.0
        hits = sum(
            1
            for r in results
            if labels[store.row_of(r.id)] == labels[query_row]
        )
        return hits / len(results)

    total_exact = total_lsh = 0.0
    for r in rows:
        row = int(r)
        spec = QuerySpec(
            query=store.feature_at(row),
            k=k,
            exclude_self=True,
            self_id=store.id_at(row),
        )
        total_exact += precision(brute_force_search(store, spec), row)
        total_lsh += precision(lsh_search(index, store, spec), row)

    return PrecisionEvaluation(
        classes=classes,
        members_per_class=members_per_class,
        k=k,
        precision_exact=total_exact / n_queries,
        precision_lsh=total_lsh / n_queries,
    )
