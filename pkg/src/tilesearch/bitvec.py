"""Packed 512-bit feature vectors and Hamming-distance arithmetic.

A feature is exactly 64 bytes. Bit ``i`` lives in byte ``i // 8`` at bit
position ``i % 8``, least-significant bit first, so the serialization is
portable across implementations. Values are immutable; every operation here
is pure and safe under concurrent readers.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import _kernels

FEATURE_BITS = 512
FEATURE_BYTES = 64
FEATURE_WORDS = 8

_HEX_CHARS = FEATURE_BYTES * 2


class BinaryFeature:
    """An immutable 512-bit visual feature code."""

    __slots__ = ("_data",)

    def __init__(self, data: bytes):
        if not isinstance(data, (bytes, bytearray, memoryview)):
            raise TypeError(f"expected bytes-like, got {type(data).__name__}")
        data = bytes(data)
        if len(data) != FEATURE_BYTES:
            raise ValueError(
                f"feature must be exactly {FEATURE_BYTES} bytes, got {len(data)}"
            )
        self._data = data

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_bytes(cls, data: bytes) -> "BinaryFeature":
        return cls(data)

    @classmethod
    def from_hex(cls, text: str) -> "BinaryFeature":
        if len(text) != _HEX_CHARS:
            raise ValueError(f"hex form must be {_HEX_CHARS} chars, got {len(text)}")
        return cls(bytes.fromhex(text))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BinaryFeature":
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        if arr.shape != (FEATURE_BITS,):
            raise ValueError(f"need exactly {FEATURE_BITS} bits, got shape {arr.shape}")
        packed = np.packbits(arr.astype(np.uint8), bitorder="little")
        return cls(packed.tobytes())

    @classmethod
    def zeros(cls) -> "BinaryFeature":
        return cls(b"\x00" * FEATURE_BYTES)

    @classmethod
    def ones(cls) -> "BinaryFeature":
        return cls(b"\xff" * FEATURE_BYTES)

    # -- views -------------------------------------------------------------

    def to_bytes(self) -> bytes:
        return self._data

    def hex(self) -> str:
        return self._data.hex()

    def bits(self) -> np.ndarray:
        """Bits as a (512,) uint8 array, index i = bit i."""
        return np.unpackbits(
            np.frombuffer(self._data, dtype=np.uint8), bitorder="little"
        )

    def words(self) -> np.ndarray:
        """Read-only (8,) little-endian uint64 view for the scan kernels."""
        w = np.frombuffer(self._data, dtype="<u8")
        w.flags.writeable = False
        return w

    def bit(self, i: int) -> int:
        if not 0 <= i < FEATURE_BITS:
            raise IndexError(f"bit index {i} out of range")
        return (self._data[i // 8] >> (i % 8)) & 1

    def popcount(self) -> int:
        return int.from_bytes(self._data, "little").bit_count()

    # -- operators ----------------------------------------------------------

    def __invert__(self) -> "BinaryFeature":
        return BinaryFeature(bytes(b ^ 0xFF for b in self._data))

    def __xor__(self, other: "BinaryFeature") -> "BinaryFeature":
        return BinaryFeature(bytes(a ^ b for a, b in zip(self._data, other._data)))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BinaryFeature) and self._data == other._data

    def __hash__(self) -> int:
        return hash(self._data)

    def __repr__(self) -> str:
        return f"BinaryFeature({self.hex()[:16]}...)"


def hamming(a: BinaryFeature, b: BinaryFeature) -> int:
    """Number of differing bits between two features (0..512)."""
    x = int.from_bytes(a.to_bytes(), "little") ^ int.from_bytes(b.to_bytes(), "little")
    return x.bit_count()


def random_feature(rng: np.random.Generator) -> BinaryFeature:
    return BinaryFeature(rng.bytes(FEATURE_BYTES))


def _as_block_words(block, n: int) -> np.ndarray:
    """Validate a packed block of n features and view it as (n, 8) uint64."""
    if isinstance(block, np.ndarray):
        if block.dtype == np.uint8:
            flat = np.ascontiguousarray(block).reshape(-1)
            if flat.size != n * FEATURE_BYTES:
                raise ValueError(
                    f"block holds {flat.size} bytes, expected {n * FEATURE_BYTES} for n={n}"
                )
            return flat.view(np.uint64).reshape(n, FEATURE_WORDS)
        if block.dtype == np.uint64:
            flat = np.ascontiguousarray(block).reshape(-1)
            if flat.size != n * FEATURE_WORDS:
                raise ValueError(
                    f"block holds {flat.size} words, expected {n * FEATURE_WORDS} for n={n}"
                )
            return flat.reshape(n, FEATURE_WORDS)
        raise TypeError(f"block dtype must be uint8 or uint64, got {block.dtype}")
    data = bytes(block)
    if len(data) != n * FEATURE_BYTES:
        raise ValueError(
            f"block holds {len(data)} bytes, expected {n * FEATURE_BYTES} for n={n}"
        )
    return np.frombuffer(data, dtype="<u8").reshape(n, FEATURE_WORDS)


def bulk_hamming(query: BinaryFeature, block, n: int) -> np.ndarray:
    """Hamming distance from ``query`` to each of the ``n`` packed vectors.

    ``block`` may be bytes-like or a uint8/uint64 ndarray holding exactly
    ``n`` contiguous 64-byte vectors. Output order matches block order.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        _as_block_words(block, 0)
        return np.empty(0, dtype=np.uint16)
    words = _as_block_words(block, n)
    return _kernels.hamming_scan(query.words(), words)
