"""Exact r-wise independent hash families and sign generators.

Both objects evaluate a uniformly random polynomial of degree ``r - 1`` over
GF(2^m) at the point ``alpha_i = i - 1`` and keep the low bits of the result.
Any r distinct evaluation points of such a polynomial are jointly uniform, and
truncating each value to its low bits preserves that, so the families are
exactly (not approximately) r-wise independent.

Seed layout: ``r`` coefficients of ``m`` bits each, constant term first,
little-endian within a coefficient. Read as one integer, coefficient ``j``
occupies bits ``[j*m, (j+1)*m)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import bits
from .errors import CapExceededError, ParameterError, UsageError
from .gf2m import FieldElement, ReductionModulus, default_modulus, eval_array, eval_values

DEFAULT_SEED_CAP = 1 << 24


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


def _is_power_of_two(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


@dataclass(frozen=True)
class HashFamilySpec:
    n: int
    ell: int
    r: int
    m: int
    mod: ReductionModulus

    @property
    def out_bits(self) -> int:
        return self.ell.bit_length() - 1

    @property
    def seed_bits(self) -> int:
        return self.r * self.m


@dataclass(frozen=True)
class BitGenSpec:
    n: int
    r: int
    m: int
    mod: ReductionModulus

    @property
    def seed_bits(self) -> int:
        return self.r * self.m


Spec = Union[HashFamilySpec, BitGenSpec]


@dataclass(frozen=True)
class KWiseSeed:
    coeffs: tuple[FieldElement, ...]

    @classmethod
    def from_values(cls, values: Sequence[int], m: int) -> "KWiseSeed":
        return cls(tuple(FieldElement(int(v), m) for v in values))

    @classmethod
    def from_int(cls, value: int, r: int, m: int) -> "KWiseSeed":
        mask = (1 << m) - 1
        return cls.from_values([(value >> (j * m)) & mask for j in range(r)], m)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(c.value for c in self.coeffs)

    def to_int(self) -> int:
        out = 0
        for j, c in enumerate(self.coeffs):
            out |= c.value << (j * c.m)
        return out


def make_hash_family(n: int, ell: int, r: int) -> HashFamilySpec:
    """r-wise independent family ``[n] -> [ell]``.

    ``ell = 1`` is accepted as the trivial single-bucket family.
    """
    if n < 1 or r < 1:
        raise ParameterError(f"need n >= 1 and r >= 1, got n={n}, r={r}")
    if not _is_power_of_two(ell):
        raise ParameterError(f"bucket count must be a power of two, got {ell}")
    m = max(_ceil_log2(n), ell.bit_length() - 1, 1)
    return HashFamilySpec(n, ell, r, m, default_modulus(m))


def make_bitgen(n: int, r: int) -> BitGenSpec:
    if n < 1 or r < 1:
        raise ParameterError(f"need n >= 1 and r >= 1, got n={n}, r={r}")
    m = max(_ceil_log2(n), 1)
    return BitGenSpec(n, r, m, default_modulus(m))


def _check(spec: Spec, seed: KWiseSeed, i: int) -> None:
    if len(seed.coeffs) != spec.r:
        raise UsageError(f"seed has {len(seed.coeffs)} coefficients, spec needs {spec.r}")
    if any(c.m != spec.m for c in seed.coeffs):
        raise UsageError("seed coefficients live in the wrong field")
    if not 1 <= i <= spec.n:
        raise UsageError(f"index {i} outside [1, {spec.n}]")


def hash_eval(spec: HashFamilySpec, seed: KWiseSeed, i: int) -> int:
    """Bucket of index ``i`` (both 1-indexed)."""
    _check(spec, seed, i)
    value = eval_values(seed.values, i - 1, spec.mod)
    return (value & (spec.ell - 1)) + 1


def bitgen_eval(spec: BitGenSpec, seed: KWiseSeed, i: int) -> int:
    _check(spec, seed, i)
    value = eval_values(seed.values, i - 1, spec.mod)
    return -1 if value & 1 else 1


def bitgen_output(spec: BitGenSpec, seed: KWiseSeed) -> list[int]:
    return [bitgen_eval(spec, seed, i) for i in range(1, spec.n + 1)]


# -- bulk evaluation ----------------------------------------------------------

def _points(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.uint64)


def hash_codes(spec: HashFamilySpec, coeffs: np.ndarray) -> np.ndarray:
    """0-indexed buckets, shape ``(N, n)``, for a ``(N, r)`` coefficient array."""
    values = eval_array(coeffs[:, None, :], _points(spec.n)[None, :], spec.mod)
    return (values & np.uint64(spec.ell - 1)).astype(np.int64)


def bit_codes(spec: BitGenSpec, coeffs: np.ndarray) -> np.ndarray:
    """Output bits (0 means +1, 1 means -1), shape ``(N, n)``."""
    values = eval_array(coeffs[:, None, :], _points(spec.n)[None, :], spec.mod)
    return (values & np.uint64(1)).astype(np.int8)


def output_codes(spec: Spec, coeffs: np.ndarray) -> np.ndarray:
    if isinstance(spec, HashFamilySpec):
        return hash_codes(spec, coeffs)
    return bit_codes(spec, coeffs)


def linear_rows(spec: BitGenSpec) -> list[int]:
    """GF(2) matrix of the seed-to-output map, one int row mask per output.

    The low bit of a polynomial evaluation is GF(2)-linear in the coefficient
    bits, so output bit ``i`` equals ``parity(rows[i] & seed_int)``.
    """
    rows = [0] * spec.n
    mask = (1 << spec.m) - 1
    for j in range(spec.seed_bits):
        unit = 1 << j
        values = [(unit >> (t * spec.m)) & mask for t in range(spec.r)]
        for i in range(spec.n):
            if eval_values(values, i, spec.mod) & 1:
                rows[i] |= unit
    return rows


# -- exhaustive independence check -------------------------------------------

@dataclass
class IndependenceReport:
    passed: bool
    seeds: int
    max_r: int
    # subset (1-indexed tuple) -> counts over targets, mixed-radix encoded with
    # the first coordinate as the least significant digit
    counts: dict[tuple[int, ...], np.ndarray] = field(repr=False)
    expected: dict[int, int]
    mismatches: list[tuple[tuple[int, ...], int, int]]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "seeds": self.seeds,
            "max_r": self.max_r,
            "expected_count_by_size": {str(t): c for t, c in self.expected.items()},
            "mismatches": [
                {"subset": list(s), "target": t, "count": c} for s, t, c in self.mismatches
            ],
        }


def verify_independence(spec: Spec, max_r: int, cap: int = DEFAULT_SEED_CAP,
                        chunk: int = 1 << 15) -> IndependenceReport:
    """Count, for every coordinate subset of size <= max_r, how many seeds hit
    each target tuple, and compare against exact uniformity."""
    total = 1 << spec.seed_bits
    if total > cap:
        raise CapExceededError("seed space", total, cap)
    if spec.seed_bits > 63:
        raise CapExceededError("seed bits", spec.seed_bits, 63)
    base = spec.ell if isinstance(spec, HashFamilySpec) else 2
    sizes = range(1, min(max_r, spec.n) + 1)
    subsets = [s for t in sizes for s in itertools.combinations(range(spec.n), t)]
    counts = {s: np.zeros(base ** len(s), dtype=np.int64) for s in subsets}

    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        words = bits.counter_words(start, stop - start)
        coeffs = bits.coefficient_block(words, 0, spec.r, spec.m)
        out = output_codes(spec, coeffs).astype(np.int64)
        for s in subsets:
            code = np.zeros(out.shape[0], dtype=np.int64)
            for pos, i in enumerate(s):
                code += out[:, i] * base ** pos
            counts[s] += np.bincount(code, minlength=base ** len(s))

    expected = {t: total // base ** t for t in sizes}
    mismatches = []
    for s, c in counts.items():
        want = expected[len(s)]
        for target in np.flatnonzero(c != want):
            mismatches.append((tuple(i + 1 for i in s), int(target), int(c[target])))
    keyed = {tuple(i + 1 for i in s): c for s, c in counts.items()}
    return IndependenceReport(not mismatches, total, max_r, keyed, expected, mismatches)

