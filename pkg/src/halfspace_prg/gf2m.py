"""Arithmetic in GF(2^m) for 1 <= m <= 32.

Elements are plain integers below ``2**m``; bit ``i`` holds the coefficient of
``x**i``. Products are carry-less multiplications reduced modulo a fixed
irreducible polynomial, so every intermediate fits in 64 bits.

Scalar functions operate on :class:`FieldElement`; the ``*_array`` variants
apply the same arithmetic elementwise to ``numpy.uint64`` arrays and back the
bulk enumerators elsewhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ParameterError, UsageError

MAX_DEGREE = 32

# Irreducible polynomials over GF(2), one per degree, bit m always set.
DEFAULT_POLYBITS = {
    1: 0b11,            # x + 1
    2: 0b111,           # x^2 + x + 1
    3: 0b1011,          # x^3 + x + 1
    4: 0x13,            # x^4 + x + 1
    5: 0x25,            # x^5 + x^2 + 1
    6: 0x43,            # x^6 + x + 1
    7: 0x83,            # x^7 + x + 1
    8: 0x11B,           # x^8 + x^4 + x^3 + x + 1
    9: 0x211,           # x^9 + x^4 + 1
    10: 0x409,          # x^10 + x^3 + 1
    11: 0x805,          # x^11 + x^2 + 1
    12: 0x1053,         # x^12 + x^6 + x^4 + x + 1
    13: 0x201B,         # x^13 + x^4 + x^3 + x + 1
    14: 0x4443,         # x^14 + x^10 + x^6 + x + 1
    15: 0x8003,         # x^15 + x + 1
    16: 0x1100B,        # x^16 + x^12 + x^3 + x + 1
    17: 0x20009,        # x^17 + x^3 + 1
    18: 0x40081,        # x^18 + x^7 + 1
    19: 0x80027,        # x^19 + x^5 + x^2 + x + 1
    20: 0x100009,       # x^20 + x^3 + 1
    21: 0x200005,       # x^21 + x^2 + 1
    22: 0x400003,       # x^22 + x + 1
    23: 0x800021,       # x^23 + x^5 + 1
    24: 0x1000087,      # x^24 + x^7 + x^2 + x + 1
    25: 0x2000009,      # x^25 + x^3 + 1
    26: 0x4000047,      # x^26 + x^6 + x^2 + x + 1
    27: 0x8000027,      # x^27 + x^5 + x^2 + x + 1
    28: 0x10000009,     # x^28 + x^3 + 1
    29: 0x20000005,     # x^29 + x^2 + 1
    30: 0x40800007,     # x^30 + x^23 + x^2 + x + 1
    31: 0x80000009,     # x^31 + x^3 + 1
    32: 0x100400007,    # x^32 + x^22 + x^2 + x + 1
}


def clmul(a: int, b: int) -> int:
    """Carry-less product of two bit-polynomials."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        b >>= 1
    return result


def poly_mod(a: int, mod: int) -> int:
    """Remainder of bit-polynomial ``a`` divided by ``mod``."""
    deg = mod.bit_length() - 1
    while a.bit_length() - 1 >= deg:
        a ^= mod << (a.bit_length() - 1 - deg)
    return a


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


@lru_cache(maxsize=None)
def is_irreducible(polybits: int) -> bool:
    """Ben-Or irreducibility test over GF(2).

    ``f`` of degree ``m`` is irreducible iff ``gcd(x^(2^i) - x, f) = 1`` for
    every ``1 <= i <= m // 2``.
    """
    m = polybits.bit_length() - 1
    if m < 1:
        return False
    if m == 1:
        return True
    x = 0b10
    power = x
    for _ in range(m // 2):
        power = poly_mod(clmul(power, power), polybits)
        if _poly_gcd(polybits, power ^ x) != 1:
            return False
    return True


@dataclass(frozen=True)
class ReductionModulus:
    m: int
    polybits: int

    def __post_init__(self):
        if not 1 <= self.m <= MAX_DEGREE:
            raise ParameterError(f"field degree must be in [1, {MAX_DEGREE}], got {self.m}")
        if self.polybits.bit_length() - 1 != self.m:
            raise ParameterError(f"modulus {self.polybits:#x} does not have degree {self.m}")
        if not is_irreducible(self.polybits):
            raise ParameterError(f"modulus {self.polybits:#x} is reducible over GF(2)")


@lru_cache(maxsize=None)
def default_modulus(m: int) -> ReductionModulus:
    if m not in DEFAULT_POLYBITS:
        raise ParameterError(f"no default modulus for degree {m}")
    return ReductionModulus(m, DEFAULT_POLYBITS[m])


@dataclass(frozen=True)
class FieldElement:
    value: int
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= MAX_DEGREE:
            raise ParameterError(f"field degree must be in [1, {MAX_DEGREE}], got {self.m}")
        if not 0 <= self.value < (1 << self.m):
            raise ParameterError(f"value {self.value} out of range for GF(2^{self.m})")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return gf_add(self, other)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return gf_mul(self, other, default_modulus(self.m))


def _check_degrees(*elements, mod: ReductionModulus | None = None) -> int:
    degrees = {e.m for e in elements}
    if mod is not None:
        degrees.add(mod.m)
    if len(degrees) != 1:
        raise UsageError(f"mismatched field degrees: {sorted(degrees)}")
    return degrees.pop()


def gf_add(a: FieldElement, b: FieldElement) -> FieldElement:
    m = _check_degrees(a, b)
    return FieldElement(a.value ^ b.value, m)


def mul_values(a: int, b: int, mod: ReductionModulus) -> int:
    """Field product on raw integer values (no degree checks)."""
    return poly_mod(clmul(a, b), mod.polybits)


def gf_mul(a: FieldElement, b: FieldElement, mod: ReductionModulus) -> FieldElement:
    m = _check_degrees(a, b, mod=mod)
    return FieldElement(mul_values(a.value, b.value, mod), m)


def eval_values(coeffs: Sequence[int], x: int, mod: ReductionModulus) -> int:
    """Horner evaluation on raw integer values, constant term first."""
    acc = 0
    for c in reversed(coeffs):
        acc = mul_values(acc, x, mod) ^ c
    return acc


def poly_eval(coeffs: Sequence[FieldElement], x: FieldElement, mod: ReductionModulus) -> FieldElement:
    if not coeffs:
        raise UsageError("poly_eval needs at least one coefficient")
    m = _check_degrees(*coeffs, x, mod=mod)
    return FieldElement(eval_values([c.value for c in coeffs], x.value, mod), m)


def gf_pow(a: FieldElement, e: int, mod: ReductionModulus) -> FieldElement:
    result = FieldElement(1, a.m)
    base = a
    while e:
        if e & 1:
            result = gf_mul(result, base, mod)
        base = gf_mul(base, base, mod)
        e >>= 1
    return result


def gf_inv(a: FieldElement, mod: ReductionModulus) -> FieldElement:
    if a.value == 0:
        raise ZeroDivisionError("zero has no inverse")
    return gf_pow(a, (1 << a.m) - 2, mod)


# -- elementwise array arithmetic ---------------------------------------------

def mul_array(a: np.ndarray, b, mod: ReductionModulus) -> np.ndarray:
    """Elementwise product of ``uint64`` arrays (or an array and a scalar)."""
    a = np.asarray(a, dtype=np.uint64).copy()
    b = np.asarray(b, dtype=np.uint64)
    top = np.uint64(1 << mod.m)
    poly = np.uint64(mod.polybits)
    one = np.uint64(1)
    acc = np.zeros(np.broadcast(a, b).shape, dtype=np.uint64)
    for bit in range(mod.m):
        sel = (b >> np.uint64(bit)) & one
        acc ^= a * sel
        a <<= one
        a ^= poly * ((a & top) >> np.uint64(mod.m))
    return acc


def eval_array(coeffs: np.ndarray, x, mod: ReductionModulus) -> np.ndarray:
    """Horner evaluation where ``coeffs[..., j]`` is the j-th coefficient.

    ``x`` broadcasts against ``coeffs[..., 0]``.
    """
    coeffs = np.asarray(coeffs, dtype=np.uint64)
    acc = np.zeros(np.broadcast(coeffs[..., 0], np.asarray(x, dtype=np.uint64)).shape, dtype=np.uint64)
    for j in range(coeffs.shape[-1] - 1, -1, -1):
        acc = mul_array(acc, x, mod) ^ coeffs[..., j]
    return acc
