"""Hot numeric kernels: numba-accelerated with a pure-numpy fallback.

The backend is chosen once at import time from the ``TILESEARCH_BACKEND``
environment variable:

* ``auto`` (default) - numba if it imports, numpy otherwise
* ``numba``          - force the JIT kernels (raise if numba is unavailable)
* ``numpy``          - force the vectorized numpy fallback

Both backends produce bit-identical integer outputs; only speed differs.
``tilesearch bench`` compares them on this machine.
"""

from __future__ import annotations

import os

import numpy as np

_VALID_BACKENDS = ("auto", "numba", "numpy")
_env = os.environ.get("TILESEARCH_BACKEND", "auto").strip().lower()
if _env not in _VALID_BACKENDS:
    raise RuntimeError(
        f"TILESEARCH_BACKEND={_env!r} is not one of {_VALID_BACKENDS}"
    )

_HAVE_NUMBA = False
if _env != "numpy":
    try:
        # workqueue is always available; TBB/OMP probing warns on this image
        os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
        import numba as nb
        from llvmlite import ir
        from numba.extending import intrinsic

        _HAVE_NUMBA = True
    except ImportError:
        if _env == "numba":
            raise

BACKEND = "numba" if _HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy fallback implementations
# ---------------------------------------------------------------------------

def hamming_scan_numpy(query_words: np.ndarray, block_words: np.ndarray) -> np.ndarray:
    """Hamming distance from one 8-word query to every row of ``block_words``.

    ``query_words`` is shape (8,) uint64, ``block_words`` shape (n, 8) uint64.
    Returns uint16 distances in row order.
    """
    return np.bitwise_count(block_words ^ query_words).sum(axis=1).astype(np.uint16)


def lsh_keys_numpy(
    vectors: np.ndarray, byte_idx: np.ndarray, bit_idx: np.ndarray
) -> np.ndarray:
    """Bit-sampling hash keys for every (row, table) pair.

    ``vectors`` is (n, 64) uint8 packed features; ``byte_idx``/``bit_idx`` are
    (tables, bits_per_key) lookup arrays derived from the sampled positions.
    Returns (n, tables) uint16 keys. Chunked so the intermediate bit tensor
    stays bounded regardless of n.
    """
    n = vectors.shape[0]
    tables, bits_per_key = byte_idx.shape
    weights = (1 << np.arange(bits_per_key, dtype=np.uint32)).astype(np.uint32)
    out = np.empty((n, tables), dtype=np.uint16)
    chunk = 1 << 16
    for start in range(0, n, chunk):
        block = vectors[start : start + chunk]
        # (m, tables, bits): sampled bit of each row for each table position
        bits = (block[:, byte_idx] >> bit_idx) & 1
        keys = (bits.astype(np.uint32) * weights).sum(axis=2)
        out[start : start + chunk] = keys.astype(np.uint16)
    if n == 0:
        out = out.reshape(0, tables)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @intrinsic
    def _popcount_u64(typingctx, src):
        # Lowers to the hardware POPCNT instruction, the same primitive the
        # classic XOR+popcount scan is built on.
        sig = nb.types.uint64(nb.types.uint64)

        def codegen(context, builder, signature, args):
            ctpop = builder.module.declare_intrinsic("llvm.ctpop", [ir.IntType(64)])
            return builder.call(ctpop, args)

        return sig, codegen

    @nb.njit(nogil=True, cache=True)
    def _hamming_scan_numba(query_words, block_words):
        n = block_words.shape[0]
        out = np.empty(n, dtype=np.uint16)
        for i in range(n):
            acc = nb.uint64(0)
            for w in range(8):
                acc += _popcount_u64(query_words[w] ^ block_words[i, w])
            out[i] = acc
        return out

    @nb.njit(nogil=True, cache=True, parallel=True)
    def _lsh_keys_numba(vectors, byte_idx, bit_idx):
        n = vectors.shape[0]
        tables, bits_per_key = byte_idx.shape
        out = np.empty((n, tables), dtype=np.uint16)
        for i in nb.prange(n):
            for t in range(tables):
                key = nb.uint32(0)
                for j in range(bits_per_key):
                    bit = (vectors[i, byte_idx[t, j]] >> bit_idx[t, j]) & 1
                    key |= nb.uint32(bit) << j
                out[i, t] = key
        return out

    def hamming_scan_numba(query_words: np.ndarray, block_words: np.ndarray) -> np.ndarray:
        return _hamming_scan_numba(
            np.ascontiguousarray(query_words), np.ascontiguousarray(block_words)
        )

    def lsh_keys_numba(
        vectors: np.ndarray, byte_idx: np.ndarray, bit_idx: np.ndarray
    ) -> np.ndarray:
        if vectors.shape[0] == 0:
            return np.empty((0, byte_idx.shape[0]), dtype=np.uint16)
        return _lsh_keys_numba(
            np.ascontiguousarray(vectors),
            np.ascontiguousarray(byte_idx),
            np.ascontiguousarray(bit_idx),
        )


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    hamming_scan = hamming_scan_numba
    lsh_keys = lsh_keys_numba
else:
    hamming_scan = hamming_scan_numpy
    lsh_keys = lsh_keys_numpy


def implementations() -> dict[str, tuple]:
    """Available (hamming_scan, lsh_keys) pairs keyed by backend name."""
    impls = {"numpy": (hamming_scan_numpy, lsh_keys_numpy)}
    if _HAVE_NUMBA:
        impls["numba"] = (hamming_scan_numba, lsh_keys_numba)
    return impls
