"""Persistent tile-id -> feature storage and the packed scan representation.

A store is built once (single writer), sealed, and then read-only forever.
On disk a sealed store named ``corpus`` is three files:

* ``corpus.feat`` - raw packed vectors, 64 bytes per row, row i = i-th insert
* ``corpus.ids``  - newline-delimited UTF-8 tile-id strings, line i <-> row i
* ``corpus.meta`` - JSON: format version, row count, vector width in bits

Sealed stores are memory-mapped and safe for any number of concurrent
readers.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .bitvec import FEATURE_BITS, FEATURE_BYTES, FEATURE_WORDS, BinaryFeature

META_VERSION = 1
_FINGERPRINT_ROWS = 4096


class StoreError(Exception):
    """Base class for store failures."""


class DuplicateIdError(StoreError):
    pass


class SealedStoreError(StoreError):
    pass


class UnknownIdError(StoreError, KeyError):
    pass


class CorruptStoreError(StoreError):
    pass


class FeatureStoreBuilder:
    """Accumulates (tile id, feature) pairs; ``seal()`` freezes them.

    Insertion order defines row order. Feeders running in parallel must
    funnel into one builder; the builder itself is not thread-safe.
    """

    def __init__(self) -> None:
        self._ids: list[str] = []
        self._seen: set[str] = set()
        self._chunks: list[bytes] = []
        self._sealed = False

    def __len__(self) -> int:
        return len(self._ids)

    def put(self, tile_id, feature: BinaryFeature) -> None:
        if self._sealed:
            raise SealedStoreError("store is sealed; no further puts")
        key = str(tile_id)
        if key in self._seen:
            raise DuplicateIdError(f"duplicate tile id {key!r}")
        if "\n" in key or not key:
            raise ValueError(f"tile id {key!r} is not a valid store key")
        self._seen.add(key)
        self._ids.append(key)
        self._chunks.append(feature.to_bytes())

    def put_raw(self, tile_id: str, vector_bytes: bytes) -> None:
        """Like put() but skips the BinaryFeature wrapper; bytes must be 64."""
        if len(vector_bytes) != FEATURE_BYTES:
            raise ValueError(f"vector must be {FEATURE_BYTES} bytes")
        self.put(tile_id, BinaryFeature(vector_bytes))

    def seal(self, prefix) -> "FeatureStore":
        """Write ``<prefix>.feat/.ids/.meta`` and return the sealed store."""
        if self._sealed:
            raise SealedStoreError("already sealed")
        self._sealed = True
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(prefix.with_suffix(prefix.suffix + ".feat"), b"".join(self._chunks))
        ids_blob = "".join(i + "\n" for i in self._ids).encode("utf-8")
        _atomic_write(prefix.with_suffix(prefix.suffix + ".ids"), ids_blob)
        meta = {"version": META_VERSION, "count": len(self._ids), "bits": FEATURE_BITS}
        _atomic_write(
            prefix.with_suffix(prefix.suffix + ".meta"),
            (json.dumps(meta, indent=2) + "\n").encode("utf-8"),
        )
        return FeatureStore.open(prefix)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def store_paths(prefix) -> dict[str, Path]:
    prefix = Path(prefix)
    return {
        "feat": prefix.with_suffix(prefix.suffix + ".feat"),
        "ids": prefix.with_suffix(prefix.suffix + ".ids"),
        "meta": prefix.with_suffix(prefix.suffix + ".meta"),
    }


class FeatureStore:
    """Immutable sealed collection: packed vectors + ordered tile ids.

    ``vectors`` is an (N, 64) uint8 array (memory-mapped when opened from
    disk); ``words`` the (N, 8) uint64 view the kernels scan. Ids are held
    as a fixed-width bytes array; the id->row map is built lazily on first
    id lookup so huge synthetic corpora pay nothing for it.
    """

    def __init__(self, ids: np.ndarray, vectors: np.ndarray, source: str = "<memory>"):
        if vectors.ndim != 2 or vectors.shape[1] != FEATURE_BYTES:
            raise ValueError(f"vectors must be (N, {FEATURE_BYTES}) uint8")
        if vectors.dtype != np.uint8:
            raise ValueError("vectors must be uint8")
        if len(ids) != vectors.shape[0]:
            raise CorruptStoreError(
                f"id count {len(ids)} != vector count {vectors.shape[0]}"
            )
        self._ids = ids
        self.vectors = vectors
        self.source = source
        self._row_index: dict[bytes, int] | None = None

    # -- constructors --------------------------------------------------------

    @classmethod
    def open(cls, prefix) -> "FeatureStore":
        """Memory-map a sealed store written by ``FeatureStoreBuilder.seal``."""
        paths = store_paths(prefix)
        for p in paths.values():
            if not p.exists():
                raise CorruptStoreError(f"missing store file {p}")
        meta = json.loads(paths["meta"].read_text(encoding="utf-8"))
        if meta.get("version") != META_VERSION:
            raise CorruptStoreError(f"unsupported store version {meta.get('version')}")
        if meta.get("bits") != FEATURE_BITS:
            raise CorruptStoreError(f"unsupported vector width {meta.get('bits')}")
        count = meta["count"]

        feat_size = paths["feat"].stat().st_size
        if feat_size % FEATURE_BYTES != 0:
            raise CorruptStoreError(
                f"{paths['feat']} is {feat_size} bytes, not a multiple of {FEATURE_BYTES}"
            )
        n_rows = feat_size // FEATURE_BYTES
        if n_rows != count:
            raise CorruptStoreError(
                f"{paths['feat']} holds {n_rows} rows but meta says {count}"
            )

        ids_text = paths["ids"].read_text(encoding="utf-8")
        id_list = ids_text.splitlines()
        if len(id_list) != count:
            raise CorruptStoreError(
                f"{paths['ids']} holds {len(id_list)} ids but meta says {count}"
            )
        ids = np.array(id_list, dtype=np.bytes_) if count else np.empty(0, dtype="S1")

        if count:
            vectors = np.memmap(paths["feat"], dtype=np.uint8, mode="r")
            vectors = vectors.reshape(count, FEATURE_BYTES)
        else:
            vectors = np.empty((0, FEATURE_BYTES), dtype=np.uint8)
        return cls(ids, vectors, source=str(prefix))

    @classmethod
    def from_arrays(cls, ids, vectors: np.ndarray, validate: bool = True) -> "FeatureStore":
        """In-memory sealed store, mainly for synthetic corpora and tests."""
        if not isinstance(ids, np.ndarray):
            ids = np.array([str(i) for i in ids], dtype=np.bytes_)
        vectors = np.ascontiguousarray(vectors, dtype=np.uint8)
        if validate and len(ids) and len(np.unique(ids)) != len(ids):
            raise DuplicateIdError("ids are not unique")
        return cls(ids, vectors)

    # -- reads ----------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def words(self) -> np.ndarray:
        """(N, 8) uint64 view over the packed vectors."""
        return self.vectors.reshape(-1).view(np.uint64).reshape(self.n, FEATURE_WORDS)

    @property
    def ids(self) -> list[str]:
        """All tile ids as strings, row order. O(N); avoid on huge stores."""
        return [i.decode("utf-8") for i in self._ids]

    def id_at(self, row: int) -> str:
        return self._ids[row].decode("utf-8")

    def row_of(self, tile_id) -> int:
        key = str(tile_id).encode("utf-8")
        if self._row_index is None:
            self._row_index = {bytes(v): i for i, v in enumerate(self._ids)}
        try:
            return self._row_index[key]
        except KeyError:
            raise UnknownIdError(f"unknown tile id {tile_id!r}") from None

    def __contains__(self, tile_id) -> bool:
        try:
            self.row_of(tile_id)
            return True
        except UnknownIdError:
            return False

    def get(self, tile_id) -> BinaryFeature:
        return self.feature_at(self.row_of(tile_id))

    def feature_at(self, row: int) -> BinaryFeature:
        if not 0 <= row < self.n:
            raise IndexError(f"row {row} out of range for store of {self.n}")
        return BinaryFeature(self.vectors[row].tobytes())

    def fingerprint(self) -> bytes:
        """Cheap content identity: count, width, head and tail row bytes."""
        h = hashlib.sha256()
        h.update(f"{self.n}:{FEATURE_BITS}".encode())
        head = min(self.n, _FINGERPRINT_ROWS)
        h.update(np.ascontiguousarray(self.vectors[:head]).tobytes())
        if self.n > head:
            tail = min(self.n - head, _FINGERPRINT_ROWS)
            h.update(np.ascontiguousarray(self.vectors[-tail:]).tobytes())
        return h.digest()
