"""The bucketed generator, its parameter schedule, and seed accounting.

A seed is ``(h, X^(1), ..., X^(ell))``: one draw from an ``r_hash``-wise
independent hash family ``[n] -> [ell]`` and ``ell`` independent seeds of an
``r_bucket``-wise independent sign generator. Output coordinate ``i`` is the
``h(i)``-th bucket generator's output at ``i``.

Seed bit layout: the hash coefficients, then bucket seeds ``1..ell``; each
coefficient little-endian. Bit ``j`` of the layout is bit ``j`` of the seed
integer.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterator, Optional

import numpy as np
from scipy.optimize import brentq

from . import bits
from .errors import CapExceededError, InfeasibleError, ParameterError, UsageError
from .gf2m import eval_array
from .kwise import (
    BitGenSpec,
    HashFamilySpec,
    KWiseSeed,
    bitgen_eval,
    hash_eval,
    make_bitgen,
    make_hash_family,
)

DEFAULT_SEED_BITS_CAP = 24


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


def log_k(k: int) -> int:
    """``ceil(log2 k)`` clamped below at 1."""
    return max(1, _ceil_log2(k))


@dataclass(frozen=True)
class GenParams:
    n: int
    ell: int
    r_hash: int
    r_bucket: int
    m_hash: int
    m_bucket: int
    delta_cnf: Optional[float] = None
    seed_len_bits: int = -1

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.ell < 1 or self.ell & (self.ell - 1):
            raise ParameterError(f"ell must be a power of two, got {self.ell}")
        if self.r_hash < 1 or self.r_bucket < 1:
            raise ParameterError("independence parameters must be >= 1")
        if self.m_hash != max(_ceil_log2(self.n), self.ell.bit_length() - 1, 1):
            raise ParameterError(f"m_hash={self.m_hash} inconsistent with n={self.n}, ell={self.ell}")
        if self.m_bucket != max(_ceil_log2(self.n), 1):
            raise ParameterError(f"m_bucket={self.m_bucket} inconsistent with n={self.n}")
        want = self.r_hash * self.m_hash + self.ell * self.r_bucket * self.m_bucket
        if self.seed_len_bits == -1:
            object.__setattr__(self, "seed_len_bits", want)
        elif self.seed_len_bits != want:
            raise ParameterError(f"seed_len_bits={self.seed_len_bits} but layout needs {want}")

    @property
    def hash_spec(self) -> HashFamilySpec:
        return make_hash_family(self.n, self.ell, self.r_hash)

    @property
    def bucket_spec(self) -> BitGenSpec:
        return make_bitgen(self.n, self.r_bucket)

    @property
    def hash_bits(self) -> int:
        return self.r_hash * self.m_hash

    @property
    def bucket_bits(self) -> int:
        return self.r_bucket * self.m_bucket

    def bucket_offset(self, b: int) -> int:
        """Bit offset of bucket ``b`` (1-indexed) in the seed layout."""
        return self.hash_bits + (b - 1) * self.bucket_bits

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "GenParams":
        fields = ("n", "ell", "r_hash", "r_bucket", "m_hash", "m_bucket", "delta_cnf", "seed_len_bits")
        missing = [f for f in fields if f not in data]
        if missing:
            raise ParameterError(f"GenParams JSON is missing {missing}")
        return cls(**{f: data[f] for f in fields})


def make_params(n: int, ell: int, r_hash: int, r_bucket: int, delta_cnf: Optional[float] = None) -> GenParams:
    """Experiment-mode parameters with explicit ``ell`` and independence levels."""
    m_hash = max(_ceil_log2(n), ell.bit_length() - 1, 1)
    m_bucket = max(_ceil_log2(n), 1)
    return GenParams(n, ell, r_hash, r_bucket, m_hash, m_bucket, delta_cnf)


def seed_length(p: GenParams) -> int:
    return p.r_hash * p.m_hash + p.ell * p.r_bucket * p.m_bucket


# -- seeds --------------------------------------------------------------------

class BitReader:
    """Sequential reader over a seed integer that tracks how much was read."""

    def __init__(self, value: int, nbits: int):
        self.value = value
        self.nbits = nbits
        self.consumed = 0

    def read(self, width: int) -> int:
        if self.consumed + width > self.nbits:
            raise UsageError(f"read past end of {self.nbits}-bit seed")
        out = (self.value >> self.consumed) & ((1 << width) - 1)
        self.consumed += width
        return out


@dataclass(frozen=True)
class GenSeed:
    hash_seed: KWiseSeed
    bucket_seeds: tuple[KWiseSeed, ...]

    @classmethod
    def read(cls, p: GenParams, reader: BitReader) -> "GenSeed":
        h = KWiseSeed.from_values([reader.read(p.m_hash) for _ in range(p.r_hash)], p.m_hash)
        buckets = tuple(
            KWiseSeed.from_values([reader.read(p.m_bucket) for _ in range(p.r_bucket)], p.m_bucket)
            for _ in range(p.ell)
        )
        return cls(h, buckets)

    @classmethod
    def from_int(cls, p: GenParams, value: int) -> "GenSeed":
        if not 0 <= value < (1 << p.seed_len_bits):
            raise UsageError(f"seed integer out of range for {p.seed_len_bits} bits")
        reader = BitReader(value, p.seed_len_bits)
        seed = cls.read(p, reader)
        assert reader.consumed == p.seed_len_bits
        return seed

    def to_int(self) -> int:
        out = self.hash_seed.to_int()
        offset = sum(c.m for c in self.hash_seed.coeffs)
        for bs in self.bucket_seeds:
            out |= bs.to_int() << offset
            offset += sum(c.m for c in bs.coeffs)
        return out

    def to_hex(self, p: GenParams) -> str:
        """Little-endian bytes of the layout, bit ``j`` in byte ``j // 8``."""
        return self.to_int().to_bytes((p.seed_len_bits + 7) // 8, "little").hex()

    @classmethod
    def from_hex(cls, p: GenParams, text: str) -> "GenSeed":
        try:
            raw = bytes.fromhex(text)
        except ValueError as exc:
            raise UsageError(f"bad seed hex: {exc}") from exc
        if len(raw) != (p.seed_len_bits + 7) // 8:
            raise UsageError(f"seed hex has {len(raw)} bytes, expected {(p.seed_len_bits + 7) // 8}")
        return cls.from_int(p, int.from_bytes(raw, "little"))


def _check_seed(p: GenParams, seed: GenSeed) -> None:
    if len(seed.hash_seed.coeffs) != p.r_hash or len(seed.bucket_seeds) != p.ell:
        raise UsageError("seed shape does not match parameters")
    if any(len(b.coeffs) != p.r_bucket for b in seed.bucket_seeds):
        raise UsageError("bucket seed length does not match r_bucket")


def generate(p: GenParams, seed: GenSeed) -> list[int]:
    """``Y_i = G(X^(h(i)))_i`` for each coordinate."""
    _check_seed(p, seed)
    hspec, bspec = p.hash_spec, p.bucket_spec
    out = []
    for i in range(1, p.n + 1):
        b = hash_eval(hspec, seed.hash_seed, i)
        out.append(bitgen_eval(bspec, seed.bucket_seeds[b - 1], i))
    return out


def enumerate_seeds(p: GenParams, cap_bits: int = DEFAULT_SEED_BITS_CAP) -> Iterator[GenSeed]:
    if p.seed_len_bits > cap_bits:
        raise CapExceededError("seed space", 1 << p.seed_len_bits, 1 << cap_bits)
    for value in range(1 << p.seed_len_bits):
        yield GenSeed.from_int(p, value)


# -- bulk generation -----------------------------------------------------------

def split_words(p: GenParams, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient arrays ``(N, r_hash)`` and ``(N, ell, r_bucket)`` from layout words."""
    hash_coeffs = bits.coefficient_block(words, 0, p.r_hash, p.m_hash)
    bucket_coeffs = np.stack(
        [bits.coefficient_block(words, p.bucket_offset(b), p.r_bucket, p.m_bucket)
         for b in range(1, p.ell + 1)],
        axis=1,
    )
    return hash_coeffs, bucket_coeffs


def hash_buckets(p: GenParams, hash_coeffs: np.ndarray) -> np.ndarray:
    """0-indexed bucket of every coordinate, shape ``(N, n)``."""
    spec = p.hash_spec
    values = eval_array(hash_coeffs[:, None, :], np.arange(p.n, dtype=np.uint64)[None, :], spec.mod)
    return (values & np.uint64(p.ell - 1)).astype(np.int64)


def generate_batch(p: GenParams, hash_coeffs: np.ndarray, bucket_coeffs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`generate`; returns ``+-1`` int8 array ``(N, n)``."""
    spec = p.bucket_spec
    buckets = hash_buckets(p, hash_coeffs)
    rows = np.arange(hash_coeffs.shape[0])[:, None]
    chosen = bucket_coeffs[rows, buckets]            # (N, n, r_bucket)
    values = eval_array(chosen, np.arange(p.n, dtype=np.uint64)[None, :], spec.mod)
    return (1 - 2 * (values & np.uint64(1)).astype(np.int8)).astype(np.int8)


def generate_words(p: GenParams, words: np.ndarray) -> np.ndarray:
    return generate_batch(p, *split_words(p, words))


# -- planning ------------------------------------------------------------------

def _next_pow2(x: float) -> int:
    ell = 1
    while ell < x:
        ell <<= 1
    return ell


def _heuristic_terms(n: int, k: int, tau: float, delta_cnf: Optional[float]) -> dict:
    """Every additive term of the overall error bound under unit constants.

    ``L = log2(k + 2)`` stands in for ``log k``; ``T = tau * ln(1/tau)``.
    """
    L = math.log2(k + 2)
    T = tau * math.log(1 / tau)
    lam = L ** 1.1 * T ** 0.2
    terms = {
        "hybrid_regular": (L ** 3 / lam ** 4) * L ** 3 * T,
        "strip": lam * math.sqrt(L),
        "invariance": L ** 1.6 * T ** 0.2,
    }
    if delta_cnf is not None:
        terms.update(_cnf_terms(n, L, tau, lam, delta_cnf))
    return {"lambda": lam, "terms": terms}


def _cnf_terms(n: int, L: float, tau: float, lam: float, delta_cnf: float) -> dict:
    root = math.sqrt(delta_cnf)
    out = {
        "cnf_moment": (L ** 3 / lam ** 4) * (1 / tau) * delta_cnf * n ** 2,
        "cnf_coupling": root / tau,
    }
    for a in (1, 2, 3):
        out[f"cnf_derivative_{a}"] = (1 / tau) * n ** a * root * L ** (a - 1) / lam ** a
    return out


def choose_delta_cnf(n: int, k: int, tau: float, delta_target: float) -> float:
    """Largest power of two (at most 1/2) keeping each CNF-dependent term
    at most ``delta_target``."""
    L = math.log2(k + 2)
    T = tau * math.log(1 / tau)
    lam = L ** 1.1 * T ** 0.2
    unit = _cnf_terms(n, L, tau, lam, 1.0)
    # terms scale as delta (cnf_moment) or sqrt(delta) (the rest)
    limits = [delta_target / unit["cnf_moment"]]
    limits += [(delta_target / v) ** 2 for key, v in unit.items() if key != "cnf_moment"]
    exponent = max(1, math.ceil(-math.log2(min(limits))))
    while any(v > delta_target for v in _cnf_terms(n, L, tau, lam, 2.0 ** -exponent).values()):
        exponent += 1
    while exponent > 1 and all(
        v <= delta_target for v in _cnf_terms(n, L, tau, lam, 2.0 ** -(exponent - 1)).values()
    ):
        exponent -= 1
    return 2.0 ** -exponent


def plan_params(n: int, k: int, s: int, tau: float, delta_target: Optional[float] = None, *,
                ell: Optional[int] = None, r_hash: Optional[int] = None,
                r_bucket: Optional[int] = None, delta_cnf: Optional[float] = None,
                c_br: float = 1.0) -> GenParams:
    """Concrete parameter schedule for (k, s, tau)-intersections on n bits.

    Keyword overrides pin individual values. Without a pinned ``delta_cnf``
    it is chosen by :func:`choose_delta_cnf` against ``delta_target``, which
    defaults to the heuristic main error term.
    """
    if not 0 < tau < 1:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    if n < 2 or k < 1 or s < 0:
        raise ParameterError(f"need n >= 2, k >= 1, s >= 0; got n={n}, k={k}, s={s}")
    lk = log_k(k)
    if delta_cnf is None:
        if delta_target is None:
            delta_target = _heuristic_terms(n, k, tau, None)["terms"]["invariance"]
        if not 0 < delta_target:
            raise ParameterError(f"delta_target must be positive, got {delta_target}")
        delta_cnf = choose_delta_cnf(n, k, tau, delta_target)
    if not 0 < delta_cnf < 1:
        raise ParameterError(f"delta_cnf must lie in (0, 1), got {delta_cnf}")
    if ell is None:
        ell = _next_pow2(1 / tau)
    if r_hash is None:
        r_hash = max(2, 2 * lk)
    if r_bucket is None:
        # log2(M / delta_cnf) with M = k * 2^s, kept out of float overflow
        log_ratio = math.log2(k) + s - math.log2(delta_cnf)
        r_bucket = 4 * lk + math.ceil(c_br * math.ceil(log_ratio ** 2))
    return make_params(n, ell, r_hash, r_bucket, delta_cnf)


def _weight_bound(L: float, tau: float) -> float:
    return L ** 1.6 * (tau * math.log(1 / tau)) ** 0.2


def solve_tau(k: int, delta_target: float) -> float:
    """Largest tau <= 1/2 with ``log2(k+2)^(8/5) * (tau ln(1/tau))^(1/5) <= delta_target``."""
    if not 0 < delta_target < 1:
        raise ParameterError(f"delta_target must lie in (0, 1), got {delta_target}")
    L = math.log2(k + 2)
    if _weight_bound(L, 0.5) <= delta_target:
        return 0.5
    lo = 2.0 ** -64
    if _weight_bound(L, lo) > delta_target:
        raise InfeasibleError(
            f"no tau above 2^-64 meets delta_target={delta_target} "
            f"(binding term log2(k+2)^1.6 * (tau ln 1/tau)^0.2 = {_weight_bound(L, lo):.3g} at 2^-64)"
        )
    # tau ln(1/tau) increases on (0, 1/e); the root lies there
    return brentq(lambda t: _weight_bound(L, t) - delta_target, lo, math.exp(-1), xtol=1e-300, rtol=4 * np.finfo(float).eps)


def plan_from_weight(n: int, k: int, t: int, delta_target: float, **overrides) -> GenParams:
    if t < 1:
        raise ParameterError(f"weight bound t must be >= 1, got {t}")
    tau = solve_tau(k, delta_target)
    s = math.ceil((t / tau) ** 2)
    overrides.setdefault("delta_target", delta_target)
    return plan_params(n, k, s, tau, **overrides)


def plan_from_weight_report(n: int, k: int, t: int, delta_target: float, **overrides) -> dict:
    tau = solve_tau(k, delta_target)
    s = math.ceil((t / tau) ** 2)
    p = plan_from_weight(n, k, t, delta_target, **overrides)
    return {"tau": tau, "s": s, "params": p}


def theoretical_error_bound(p: GenParams, k: int, tau: float) -> dict:
    """HEURISTIC evaluation of the error bound with every hidden constant set to 1."""
    if not 0 < tau < 1:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    info = _heuristic_terms(p.n, k, tau, p.delta_cnf)
    return {
        "label": "HEURISTIC",
        "delta_estimate": math.fsum(info["terms"].values()),
        "lambda": info["lambda"],
        "terms": info["terms"],
        "log_k": math.log2(k + 2),
        "tau": tau,
        "k": k,
    }
