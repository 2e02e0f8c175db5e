"""Keyed splitmix64 hashing and the uniform / Gaussian / permutation streams built on it.

Every function accepts either Python ints or numpy ``uint64`` arrays for the
seed and index arguments; array inputs broadcast and return arrays.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)

#: Reserved token id used to left-pad contexts shorter than the window.
PAD_TOKEN = 0xFFFFFFFF


def _mix64_int(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_arr(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(GOLDEN)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def mix64(x):
    """splitmix64 finalizer (with the golden-ratio increment)."""
    if isinstance(x, (int, np.integer)):
        return _mix64_int(int(x) & MASK64)
    return _mix64_arr(np.asarray(x, dtype=np.uint64))


def _as_key(key) -> bytes:
    if isinstance(key, str):
        key = bytes.fromhex(key)
    key = bytes(key)
    if not 1 <= len(key) <= 64:
        raise ValueError(f"secret key must be 1..64 bytes, got {len(key)}")
    return key


def _blocks(data: bytes) -> list[int]:
    if len(data) % 8:
        data = data + b"\x00" * (8 - len(data) % 8)
    return [int.from_bytes(data[i:i + 8], "little") for i in range(0, len(data), 8)]


def derive_seed(key, context) -> int:
    """Hash ``key`` and an m-gram of token ids into a 64-bit context seed.

    The byte string ``key || le32(id_1) || ... || le32(id_m)`` is zero-padded to a
    multiple of 8 bytes and folded block-by-block (little-endian u64) through
    ``state = mix64(state ^ block)`` starting from ``state = 0``.
    """
    key = _as_key(key)
    ids = [int(t) for t in context]
    if not ids:
        raise ValueError("context must contain at least one token id")
    if any(t < 0 or t > 0xFFFFFFFF for t in ids):
        raise ValueError("token ids must fit in 32 bits")
    data = key + b"".join(t.to_bytes(4, "little") for t in ids)
    state = 0
    for b in _blocks(data):
        state = _mix64_int(state ^ b)
    return state


def derive_seeds(key, contexts) -> np.ndarray:
    """Vectorised :func:`derive_seed` over the rows of an ``(N, m)`` id array.

    ``key`` is either one key shared by every row or a sequence of N keys of
    equal length.
    """
    ctx = np.asarray(contexts, dtype=np.int64)
    if ctx.ndim != 2 or ctx.shape[1] < 1:
        raise ValueError("contexts must be a 2-D array with at least one column")
    if ctx.size and (ctx.min() < 0 or ctx.max() > 0xFFFFFFFF):
        raise ValueError("token ids must fit in 32 bits")
    n, m = ctx.shape
    if isinstance(key, (bytes, bytearray, str)):
        keys = [_as_key(key)]
    else:
        keys = [_as_key(k) for k in key]
        if len(keys) != n:
            raise ValueError("need one key per context row")
        if len({len(k) for k in keys}) > 1:
            raise ValueError("per-row keys must share one length")
    klen = len(keys[0])
    kbytes = np.frombuffer(b"".join(keys), dtype=np.uint8).reshape(len(keys), klen)
    kbytes = np.broadcast_to(kbytes, (n, klen))
    body = ctx.astype("<u4").view(np.uint8).reshape(n, 4 * m)
    data = np.concatenate([kbytes, body], axis=1)
    pad = (-data.shape[1]) % 8
    if pad:
        data = np.concatenate([data, np.zeros((n, pad), dtype=np.uint8)], axis=1)
    blocks = np.ascontiguousarray(data).view("<u8").astype(np.uint64)
    state = np.zeros(n, dtype=np.uint64)
    for j in range(blocks.shape[1]):
        state = _mix64_arr(state ^ blocks[:, j])
    return state


def _bits_to_unit(z):
    if isinstance(z, int):
        return (z >> 11) * _INV53
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


def uniform(seed, index):
    """The ``index``-th uniform in ``[0, 1)`` of the stream keyed by ``seed``.

    Values lie on the 53-bit grid ``k / 2**53`` and are never 1.0.
    """
    if isinstance(seed, (int, np.integer)) and isinstance(index, (int, np.integer)):
        if index < 0:
            raise ValueError("index must be non-negative")
        return _bits_to_unit(_mix64_int((int(seed) ^ (((int(index) + 1) * GOLDEN) & MASK64)) & MASK64))
    s = np.asarray(seed, dtype=np.uint64)
    i = np.asarray(index, dtype=np.uint64)
    return _bits_to_unit(_mix64_arr(s ^ ((i + np.uint64(1)) * np.uint64(GOLDEN))))


def gaussian(seed, index):
    """Standard normal via Box-Muller (cosine branch) on uniforms ``2i`` and ``2i+1``."""
    if isinstance(index, (int, np.integer)) and isinstance(seed, (int, np.integer)):
        u1 = uniform(seed, 2 * int(index))
        u2 = uniform(seed, 2 * int(index) + 1)
        u1 = u1 if u1 > 0.0 else _INV53
        return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))
    i = np.asarray(index, dtype=np.uint64)
    u1 = uniform(seed, np.uint64(2) * i)
    u2 = uniform(seed, np.uint64(2) * i + np.uint64(1))
    u1 = np.where(u1 > 0.0, u1, _INV53)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def permutation(seed: int, size: int) -> np.ndarray:
    """Fisher-Yates shuffle of ``0..size-1`` driven by ``uniform(seed, 0..size-2)``.

    Step ``k`` (``k = 0..size-2``) swaps position ``i = size-1-k`` with a
    position ``j`` drawn uniformly from ``0..i``.
    """
    if size < 1:
        raise ValueError("permutation size must be at least 1")
    perm = np.arange(size, dtype=np.int64)
    if size == 1:
        return perm
    u = uniform(np.uint64(seed), np.arange(size - 1, dtype=np.uint64))
    spans = np.arange(size, 1, -1)  # i + 1 for i = size-1 .. 1
    js = np.minimum((u * spans).astype(np.int64), spans - 1)
    for k in range(size - 1):
        i = size - 1 - k
        j = js[k]
        perm[i], perm[j] = perm[j], perm[i]
    return perm
