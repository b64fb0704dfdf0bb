"""Approximate k-NN: bit-sampling LSH with exact re-ranking of candidates.

The family is 32 hash functions; each selects 16 distinct bit positions out
of 512 (sampled without replacement within a table, independently across
tables). A table maps each realized 16-bit key to the list of rows holding
it. A query unions its 32 buckets into a candidate set, which is then
re-ranked with the exact scan, so results ordering matches brute force
restricted to the candidates.

For a pair at Hamming distance d the per-table collision probability is
hypergeometric: C(512-d,16)/C(512,16).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .bitvec import FEATURE_BITS, BinaryFeature, bulk_hamming
from .exact import _ROW_BITS, QuerySpec, SearchResult, _smallest_keys, results_from_keys
from .store import FeatureStore

DEFAULT_TABLES = 32
DEFAULT_BITS_PER_KEY = 16

_MAGIC = b"TSLSHv1\n"


class LshError(Exception):
    pass


class IndexMismatchError(LshError):
    """The index was built over a different store than the one supplied."""


@dataclass(frozen=True)
class HashFamily:
    """Seeded family of bit-sampling hash functions.

    ``positions[t, j]`` is the j-th sampled bit position of table t; each
    table's positions are distinct. Fully determined by (seed, shape).
    """

    seed: int
    positions: np.ndarray

    def __post_init__(self) -> None:
        pos = self.positions
        if pos.ndim != 2:
            raise ValueError("positions must be (tables, bits_per_key)")
        if pos.size and (pos.min() < 0 or pos.max() >= FEATURE_BITS):
            raise ValueError(f"positions must lie in [0, {FEATURE_BITS})")
        for t in range(pos.shape[0]):
            if len(set(pos[t].tolist())) != pos.shape[1]:
                raise ValueError(f"table {t} samples a repeated bit position")
        pos.setflags(write=False)

    @property
    def tables(self) -> int:
        return self.positions.shape[0]

    @property
    def bits_per_key(self) -> int:
        return self.positions.shape[1]

    def byte_bit_index(self) -> tuple[np.ndarray, np.ndarray]:
        """(byte, bit-in-byte) lookup arrays for the key kernels."""
        return (
            (self.positions // 8).astype(np.uint8),
            (self.positions % 8).astype(np.uint8),
        )


def make_family(
    seed: int, tables: int = DEFAULT_TABLES, bits_per_key: int = DEFAULT_BITS_PER_KEY
) -> HashFamily:
    """Draw a family deterministically from ``seed``."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    if tables < 1 or not 1 <= bits_per_key <= 16:
        # keys are uint16 end to end (kernels, CSR, file format)
        raise ValueError("need tables >= 1 and 1 <= bits_per_key <= 16")
    rng = np.random.default_rng(seed)
    positions = np.stack(
        [rng.choice(FEATURE_BITS, size=bits_per_key, replace=False) for _ in range(tables)]
    ).astype(np.uint16)
    return HashFamily(seed=seed, positions=positions)


def hash_key(feature: BinaryFeature, family: HashFamily, table: int) -> int:
    """Key of ``feature`` under one table: bit j = sampled bit j."""
    if not 0 <= table < family.tables:
        raise IndexError(f"table {table} out of range [0, {family.tables})")
    data = feature.to_bytes()
    key = 0
    # plain ints: numpy uint16 scalars would overflow downstream key+1 math
    for j, pos in enumerate(family.positions[table].tolist()):
        key |= ((data[pos >> 3] >> (pos & 7)) & 1) << j
    return key


def _all_keys(vectors: np.ndarray, family: HashFamily) -> np.ndarray:
    """(N, tables) uint16 key matrix via the active kernel backend."""
    byte_idx, bit_idx = family.byte_bit_index()
    return _kernels.lsh_keys(np.asarray(vectors), byte_idx, bit_idx)


class LshIndex:
    """Per-table bucket maps in CSR form over one sealed FeatureStore.

    For table t, rows hashed to key K occupy
    ``rows[t][offsets[t, K] : offsets[t, K + 1]]`` in ascending row order.
    """

    def __init__(
        self,
        family: HashFamily,
        offsets: np.ndarray,
        rows: list[np.ndarray],
        count: int,
        store_fingerprint: bytes,
    ):
        self.family = family
        self.offsets = offsets
        self.rows = rows
        self.count = count
        self.store_fingerprint = store_fingerprint

    @property
    def n_keys(self) -> int:
        return 1 << self.family.bits_per_key

    def bucket(self, table: int, key: int) -> np.ndarray:
        key = int(key)
        start, stop = self.offsets[table, key], self.offsets[table, key + 1]
        return self.rows[table][start:stop]

    def candidates(self, feature: BinaryFeature) -> np.ndarray:
        """Deduplicated union of the query's buckets, ascending row order."""
        parts = [
            self.bucket(t, hash_key(feature, self.family, t))
            for t in range(self.family.tables)
        ]
        merged = np.concatenate(parts) if parts else np.empty(0, dtype=np.uint32)
        return np.unique(merged)

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> Path:
        """Serialize to ``<path>`` (conventionally ``<store>.lsh``)."""
        path = Path(path)
        fam = self.family
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(
                struct.pack(
                    "<QIIQ32s",
                    fam.seed,
                    fam.tables,
                    fam.bits_per_key,
                    self.count,
                    self.store_fingerprint,
                )
            )
            f.write(fam.positions.astype("<u2").tobytes())
            for t in range(fam.tables):
                counts = np.diff(self.offsets[t]).astype("<u4")
                nonzero = np.flatnonzero(counts)
                f.write(struct.pack("<I", len(nonzero)))
                f.write(nonzero.astype("<u2").tobytes())
                f.write(counts[nonzero].tobytes())
                f.write(self.rows[t].astype("<u4").tobytes())
        return path

    @classmethod
    def load(cls, path) -> "LshIndex":
        path = Path(path)
        with open(path, "rb") as f:
            magic = f.read(len(_MAGIC))
            if magic != _MAGIC:
                raise LshError(f"{path} is not an LSH index file")
            header = f.read(struct.calcsize("<QIIQ32s"))
            seed, tables, bits_per_key, count, fingerprint = struct.unpack(
                "<QIIQ32s", header
            )
            positions = np.frombuffer(
                f.read(tables * bits_per_key * 2), dtype="<u2"
            ).reshape(tables, bits_per_key).copy()
            family = HashFamily(seed=seed, positions=positions.astype(np.uint16))
            n_keys = 1 << bits_per_key
            offsets = np.zeros((tables, n_keys + 1), dtype=np.int64)
            rows: list[np.ndarray] = []
            for t in range(tables):
                (n_buckets,) = struct.unpack("<I", f.read(4))
                keys = np.frombuffer(f.read(n_buckets * 2), dtype="<u2")
                counts = np.frombuffer(f.read(n_buckets * 4), dtype="<u4")
                total = int(counts.sum())
                table_rows = np.frombuffer(f.read(total * 4), dtype="<u4").copy()
                if len(table_rows) != total:
                    raise LshError(f"{path}: truncated table {t}")
                offsets[t, keys.astype(np.int64) + 1] = counts
                np.cumsum(offsets[t], out=offsets[t])
                rows.append(table_rows.astype(np.uint32))
            trailing = f.read(1)
            if trailing:
                raise LshError(f"{path}: trailing bytes after last table")
        return cls(family, offsets, rows, count, fingerprint)


def build_index(
    store: FeatureStore,
    family: HashFamily,
    bucket_cap: int | None = None,
) -> LshIndex:
    """Hash every store row into all tables.

    ``bucket_cap`` optionally truncates each bucket to its earliest rows;
    off by default (an explicit operational safety valve, never silent).
    """
    n = store.n
    keys = _all_keys(store.vectors, family)
    n_keys = 1 << family.bits_per_key
    offsets = np.zeros((family.tables, n_keys + 1), dtype=np.int64)
    rows: list[np.ndarray] = []
    for t in range(family.tables):
        table_keys = np.ascontiguousarray(keys[:, t])
        counts = np.bincount(table_keys, minlength=n_keys)
        order = np.argsort(table_keys, kind="stable").astype(np.uint32)
        if bucket_cap is not None:
            starts = np.concatenate(([0], np.cumsum(counts)))[:-1]
            rank_in_bucket = np.arange(n, dtype=np.int64) - np.repeat(starts, counts)
            order = order[rank_in_bucket < bucket_cap]
            counts = np.minimum(counts, bucket_cap)
        offsets[t, 1:] = np.cumsum(counts)
        rows.append(order)
    return LshIndex(
        family=family,
        offsets=offsets,
        rows=rows,
        count=n,
        store_fingerprint=store.fingerprint(),
    )


def lsh_search(index: LshIndex, store: FeatureStore, spec: QuerySpec) -> list[SearchResult]:
    """Exact brute force restricted to the query's candidate set.

    Ordering and tie rules are identical to the full scan; an empty candidate
    set yields an empty result list.
    """
    if index.store_fingerprint != store.fingerprint():
        raise IndexMismatchError(
            "index was not built over this store (fingerprint mismatch)"
        )
    cand = index.candidates(spec.query)
    if spec.exclude_self and spec.self_id is not None and spec.self_id in store:
        self_row = store.row_of(spec.self_id)
        pos = np.searchsorted(cand, self_row)
        if pos < len(cand) and cand[pos] == self_row:
            cand = np.delete(cand, pos)
    if len(cand) == 0:
        return []
    block = np.ascontiguousarray(store.vectors[cand])
    dists = bulk_hamming(spec.query, block, len(cand))
    keys = (dists.astype(np.uint64) << _ROW_BITS) | cand.astype(np.uint64)
    best = _smallest_keys(keys, spec.k)
    return results_from_keys(store, best, spec.k)


def measure_recall(
    index: LshIndex,
    store: FeatureStore,
    queries,
    k: int,
    exact_fn=None,
) -> float:
    """Mean over queries of |lsh top-k ids ∩ exact top-k ids| / k."""
    from .exact import brute_force_search

    queries = list(queries)
    if not queries:
        raise ValueError("need at least one query")
    exact_fn = exact_fn or brute_force_search
    total = 0.0
    for q in queries:
        spec = QuerySpec(query=q, k=k)
        exact_ids = {r.id for r in exact_fn(store, spec)}
        lsh_ids = {r.id for r in lsh_search(index, store, spec)}
        total += len(exact_ids & lsh_ids) / k
    return total / len(queries)


# ---------------------------------------------------------------------------
# closed-form collision analytics
# ---------------------------------------------------------------------------

def collision_probability(
    distance: int,
    bits_per_key: int = DEFAULT_BITS_PER_KEY,
    width: int = FEATURE_BITS,
) -> float:
    """P(two vectors at Hamming ``distance`` share one table's key).

    Hypergeometric: all sampled bits must avoid the differing positions,
    C(width-d, m) / C(width, m).
    """
    if not 0 <= distance <= width:
        raise ValueError(f"distance must be in [0, {width}]")
    if distance > width - bits_per_key:
        return 0.0
    p = 1.0
    for j in range(bits_per_key):
        p *= (width - distance - j) / (width - j)
    return p


def retrieval_probability(
    distance: int,
    tables: int = DEFAULT_TABLES,
    bits_per_key: int = DEFAULT_BITS_PER_KEY,
    width: int = FEATURE_BITS,
) -> float:
    """P(at least one of ``tables`` independent tables collides)."""
    p = collision_probability(distance, bits_per_key, width)
    return 1.0 - (1.0 - p) ** tables


def predicted_recall(
    distances,
    tables: int = DEFAULT_TABLES,
    bits_per_key: int = DEFAULT_BITS_PER_KEY,
    width: int = FEATURE_BITS,
) -> float:
    """Analytic recall@k: mean retrieval probability over the exact top-k
    distances of each query (flattened over queries)."""
    distances = np.asarray(distances).reshape(-1)
    if distances.size == 0:
        raise ValueError("need at least one distance")
    return float(
        np.mean([retrieval_probability(int(d), tables, bits_per_key, width) for d in distances])
    )
