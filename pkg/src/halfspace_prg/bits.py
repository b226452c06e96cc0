"""Bit-field helpers over little-endian ``uint64`` word arrays."""

from __future__ import annotations

import numpy as np


def counter_words(start: int, count: int) -> np.ndarray:
    """Seed integers ``start .. start+count-1`` as a ``(count, 1)`` word array."""
    return np.arange(start, start + count, dtype=np.uint64).reshape(count, 1)


def extract_bits(words: np.ndarray, offset: int, width: int) -> np.ndarray:
    """Read ``width <= 64`` bits starting at bit ``offset`` of each row."""
    word, shift = divmod(offset, 64)
    lo = words[:, word] >> np.uint64(shift)
    if shift + width > 64:
        hi = words[:, word + 1] << np.uint64(64 - shift)
        lo = lo | hi
    if width < 64:
        lo = lo & np.uint64((1 << width) - 1)
    return lo


def coefficient_block(words: np.ndarray, offset: int, r: int, m: int) -> np.ndarray:
    """``(N, r)`` array of consecutive m-bit coefficients starting at ``offset``."""
    out = np.empty((words.shape[0], r), dtype=np.uint64)
    for j in range(r):
        out[:, j] = extract_bits(words, offset + j * m, m)
    return out


def int_to_bits(value: int, nbits: int) -> list[int]:
    return [(value >> i) & 1 for i in range(nbits)]


def parity(x: int) -> int:
    return bin(x).count("1") & 1


def gf2_basis(vectors) -> list[int]:
    """Reduced basis (as ints) of the GF(2) span of integer bit-vectors."""
    basis: dict[int, int] = {}
    for v in vectors:
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return list(basis.values())


def span(basis: list[int]) -> np.ndarray:
    """All ``2**len(basis)`` elements of the span, as an int64 array."""
    points = np.zeros(1, dtype=np.int64)
    for b in basis:
        points = np.concatenate([points, points ^ np.int64(b)])
    return points
