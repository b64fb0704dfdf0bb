import numpy as np
import pytest

from tilesearch.bitvec import FEATURE_BYTES, BinaryFeature
from tilesearch.store import FeatureStore


def random_vectors(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(n, FEATURE_BYTES), dtype=np.uint8)


def random_store(n: int, seed: int = 0) -> FeatureStore:
    vectors = random_vectors(n, seed)
    return FeatureStore.from_arrays([f"t{i}" for i in range(n)], vectors)


def flip_bits(vector: np.ndarray, positions) -> np.ndarray:
    """Copy of a packed 64-byte vector with the given bit positions flipped."""
    bits = np.unpackbits(vector, bitorder="little")
    bits[np.asarray(positions, dtype=np.int64)] ^= 1
    return np.packbits(bits, bitorder="little")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def as_feature(vector: np.ndarray) -> BinaryFeature:
    return BinaryFeature(vector.tobytes())
