"""Tile pixels -> 512-bit codes.

Two routes produce features:

* a built-in deterministic featurizer: area-average the tile down to a small
  patch, standardize, project onto 512 seeded random unit hyperplanes, and
  keep the projection signs (a locality-sensitive sign code over pixel
  structure, standing in for a trained CNN while preserving the exact
  downstream contract);
* an import path for externally computed float features (512 little-endian
  float32 per record, no header), binarized by thresholding at 0.5.

A 128x128x3 8-bit tile is 49,152 bytes and its code is 64 bytes: a 768x
reduction (1536x for 16-bit tiles).

Everything here is pure: same pixels + same spec give the same code, bit for
bit, regardless of thread count. The projection deliberately avoids BLAS
(elementwise multiply + numpy pairwise sum) so the sign of near-zero
projections cannot drift with runtime threading.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bitvec import FEATURE_BITS, BinaryFeature

KIND_RANDOM_HYPERPLANE = "random-hyperplane"
KIND_EXTERNAL_IMPORT = "external-import"

FLOAT_RECORD_DTYPE = np.dtype("<f4")


class FeaturizerError(Exception):
    pass


@dataclass(frozen=True)
class FeaturizerSpec:
    """How tiles become codes; ``seed`` fully determines the built-in path."""

    kind: str = KIND_RANDOM_HYPERPLANE
    seed: int = 0
    patch_size: int = 16

    def __post_init__(self) -> None:
        if self.kind not in (KIND_RANDOM_HYPERPLANE, KIND_EXTERNAL_IMPORT):
            raise ValueError(f"unknown featurizer kind {self.kind!r}")
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")


def binarize(values) -> BinaryFeature:
    """Threshold 512 floats at 0.5 (ties go to 1)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (FEATURE_BITS,):
        raise FeaturizerError(
            f"float feature must have exactly {FEATURE_BITS} values, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise FeaturizerError("float feature contains non-finite values")
    return BinaryFeature.from_bits((arr >= 0.5).astype(np.uint8))


@functools.lru_cache(maxsize=32)
def _hyperplanes(seed: int, dim: int) -> np.ndarray:
    """512 unit hyperplanes in R^dim, fixed by seed; rows are unit length."""
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((FEATURE_BITS, dim))
    planes /= np.linalg.norm(planes, axis=1, keepdims=True)
    planes.setflags(write=False)
    return planes


def featurize(pixels: np.ndarray, spec: FeaturizerSpec) -> BinaryFeature:
    """Code a square tile with the seeded random-hyperplane featurizer.

    Pipeline: area-average down to patch_size x patch_size x bands, flatten,
    standardize to zero mean / unit variance (zero vector if variance is 0:
    blank ocean/nodata tiles are common and must not error), project, and
    set bit i when projection i >= 0. A zero-variance tile therefore takes
    the fixed all-ones code.
    """
    if spec.kind != KIND_RANDOM_HYPERPLANE:
        raise FeaturizerError(f"featurize() requires kind={KIND_RANDOM_HYPERPLANE!r}")
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        pixels = pixels[:, :, np.newaxis]
    if pixels.ndim != 3 or pixels.shape[0] != pixels.shape[1]:
        raise FeaturizerError(f"tile pixels must be square (S, S, bands), got {pixels.shape}")
    side = pixels.shape[0]
    p = spec.patch_size
    if side % p != 0:
        raise FeaturizerError(f"tile side {side} is not a multiple of patch_size {p}")

    factor = side // p
    bands = pixels.shape[2]
    down = (
        pixels.astype(np.float64)
        .reshape(p, factor, p, factor, bands)
        .mean(axis=(1, 3))
    )
    flat = down.ravel()
    std = flat.std()
    x = np.zeros_like(flat) if std == 0.0 else (flat - flat.mean()) / std

    planes = _hyperplanes(spec.seed, flat.size)
    projections = (planes * x).sum(axis=1)
    return BinaryFeature.from_bits((projections >= 0.0).astype(np.uint8))


def load_tile_ids(path) -> list[str]:
    """Read the newline-delimited tile-id file that orders an import file."""
    return Path(path).read_text(encoding="utf-8").splitlines()


def import_float_features(path, ids: Sequence) -> list[tuple[object, np.ndarray]]:
    """Pair external float records with tile ids, in file order.

    The file must hold exactly ``len(ids)`` records of 512 little-endian
    float32 each; non-finite values are rejected.
    """
    path = Path(path)
    blob = path.read_bytes()
    record_bytes = FEATURE_BITS * FLOAT_RECORD_DTYPE.itemsize
    if len(blob) != len(ids) * record_bytes:
        raise FeaturizerError(
            f"{path} is {len(blob)} bytes; {len(ids)} ids need exactly "
            f"{len(ids) * record_bytes}"
        )
    if len(ids) == 0:
        return []
    records = np.frombuffer(blob, dtype=FLOAT_RECORD_DTYPE).reshape(len(ids), FEATURE_BITS)
    if not np.all(np.isfinite(records)):
        raise FeaturizerError(f"{path} contains non-finite float values")
    return [(tile_id, records[i].copy()) for i, tile_id in enumerate(ids)]


def write_float_features(path, features: Iterable[np.ndarray]) -> Path:
    """Write records in the import format (one 512-float32 row each)."""
    path = Path(path)
    with open(path, "wb") as f:
        for row in features:
            arr = np.asarray(row, dtype=FLOAT_RECORD_DTYPE)
            if arr.shape != (FEATURE_BITS,):
                raise FeaturizerError(f"each record needs {FEATURE_BITS} values")
            f.write(arr.tobytes())
    return path
