"""32-bit xxHash over byte strings and over row-matrices of equal width.

The scalar form is the reference implementation used for single seed lookups
and for test vectors; the row form computes the same function down the rows of
an (n, width) uint8 matrix with numpy, which is what makes whole-genome index
construction tractable in Python.
"""

from __future__ import annotations

import numpy as np

_PRIME1 = 2654435761
_PRIME2 = 2246822519
_PRIME3 = 3266489917
_PRIME4 = 668265263
_PRIME5 = 374761393
_M32 = 0xFFFFFFFF


def _rotl(x: int, r: int) -> int:
    return ((x << r) & _M32) | (x >> (32 - r))


def xxhash32(data: bytes, seed: int = 0) -> int:
    """xxHash32 of ``data`` with the given seed."""
    length = len(data)
    seed &= _M32
    i = 0
    if length >= 16:
        v1 = (seed + _PRIME1 + _PRIME2) & _M32
        v2 = (seed + _PRIME2) & _M32
        v3 = seed
        v4 = (seed - _PRIME1) & _M32
        while i + 16 <= length:
            v1 = (_rotl((v1 + int.from_bytes(data[i : i + 4], "little") * _PRIME2) & _M32, 13) * _PRIME1) & _M32
            v2 = (_rotl((v2 + int.from_bytes(data[i + 4 : i + 8], "little") * _PRIME2) & _M32, 13) * _PRIME1) & _M32
            v3 = (_rotl((v3 + int.from_bytes(data[i + 8 : i + 12], "little") * _PRIME2) & _M32, 13) * _PRIME1) & _M32
            v4 = (_rotl((v4 + int.from_bytes(data[i + 12 : i + 16], "little") * _PRIME2) & _M32, 13) * _PRIME1) & _M32
            i += 16
        h = (_rotl(v1, 1) + _rotl(v2, 7) + _rotl(v3, 12) + _rotl(v4, 18)) & _M32
    else:
        h = (seed + _PRIME5) & _M32
    h = (h + length) & _M32
    while i + 4 <= length:
        h = (_rotl((h + int.from_bytes(data[i : i + 4], "little") * _PRIME3) & _M32, 17) * _PRIME4) & _M32
        i += 4
    while i < length:
        h = (_rotl((h + data[i] * _PRIME5) & _M32, 11) * _PRIME1) & _M32
        i += 1
    h ^= h >> 15
    h = (h * _PRIME2) & _M32
    h ^= h >> 13
    h = (h * _PRIME3) & _M32
    h ^= h >> 16
    return h


def _rotl_vec(x: np.ndarray, r: int) -> np.ndarray:
    return (x << np.uint32(r)) | (x >> np.uint32(32 - r))


def xxhash32_rows(rows: np.ndarray, seed: int = 0) -> np.ndarray:
    """xxHash32 of every row of an (n, width) uint8 matrix.

    Equivalent to ``[xxhash32(row.tobytes(), seed) for row in rows]``.
    """
    rows = np.ascontiguousarray(rows, dtype=np.uint8)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-d uint8 array")
    n, width = rows.shape

    p1 = np.uint32(_PRIME1)
    p2 = np.uint32(_PRIME2)
    p3 = np.uint32(_PRIME3)
    p4 = np.uint32(_PRIME4)
    p5 = np.uint32(_PRIME5)
    seed &= _M32

    def word(col: int) -> np.ndarray:
        w = rows[:, col].astype(np.uint32)
        w |= rows[:, col + 1].astype(np.uint32) << np.uint32(8)
        w |= rows[:, col + 2].astype(np.uint32) << np.uint32(16)
        w |= rows[:, col + 3].astype(np.uint32) << np.uint32(24)
        return w

    i = 0
    if width >= 16:
        v = [
            np.full(n, (seed + _PRIME1 + _PRIME2) & _M32, dtype=np.uint32),
            np.full(n, (seed + _PRIME2) & _M32, dtype=np.uint32),
            np.full(n, seed, dtype=np.uint32),
            np.full(n, (seed - _PRIME1) & _M32, dtype=np.uint32),
        ]
        while i + 16 <= width:
            for lane in range(4):
                v[lane] = _rotl_vec(v[lane] + word(i + 4 * lane) * p2, 13) * p1
            i += 16
        h = _rotl_vec(v[0], 1) + _rotl_vec(v[1], 7) + _rotl_vec(v[2], 12) + _rotl_vec(v[3], 18)
    else:
        h = np.full(n, (seed + _PRIME5) & _M32, dtype=np.uint32)
    h = h + np.uint32(width)
    while i + 4 <= width:
        h = _rotl_vec(h + word(i) * p3, 17) * p4
        i += 4
    while i < width:
        h = _rotl_vec(h + rows[:, i].astype(np.uint32) * p5, 11) * p1
        i += 1
    h ^= h >> np.uint32(15)
    h *= p2
    h ^= h >> np.uint32(13)
    h *= p3
    h ^= h >> np.uint32(16)
    return h
