"""Expectations under the uniform and generator distributions, fooling error,
and approximate counting of satisfying assignments.

Exact estimators accumulate integer sums of ``+-1`` values and return
:class:`fractions.Fraction` means. Monte Carlo estimators draw generator seeds
from :class:`~halfspace_prg.streams.CounterStream` and attach a two-sided
Hoeffding halfwidth.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from . import bits, streams
from .errors import CapExceededError, ParameterError, UsageError
from .kwise import linear_rows
from .ltf import Intersection, Ltf, Problem, format_rational, load_problem
from .prggen import GenParams, generate_words, hash_buckets

DEFAULT_CAP = 1 << 24
DEFAULT_ALPHA = 0.05
CHUNK = 1 << 15

EXACT_UNIFORM = "ExactUniform"
EXACT_SEEDS = "ExactSeeds"
MONTE_CARLO_SEEDS = "MonteCarloSeeds"


def hoeffding_halfwidth(N: int, alpha: float = DEFAULT_ALPHA, value_range: float = 1.0) -> float:
    """Two-sided Hoeffding halfwidth for the mean of N draws in an interval of
    length ``value_range``."""
    if N < 1:
        raise ParameterError("need at least one sample")
    return value_range * math.sqrt(math.log(2 / alpha) / (2 * N))


@dataclass(frozen=True)
class ExpectationEstimate:
    value: Union[Fraction, float]
    method: str
    error: float
    sample_count: int
    rng_stream_id: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.method != MONTE_CARLO_SEEDS

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        out = {
            "value": float(self.value),
            "method": self.method,
            "error": self.error,
            "sample_count": self.sample_count,
            "rng_stream_id": self.rng_stream_id,
        }
        if isinstance(self.value, Fraction):
            out["value_exact"] = format_rational(self.value)
        return out


def as_batch(F) -> Callable[[np.ndarray], np.ndarray]:
    """Batch evaluator for ``F``: its ``evaluate_batch`` or a row-wise fallback."""
    if hasattr(F, "evaluate_batch"):
        return F.evaluate_batch
    if callable(F):
        return lambda X: np.array([F(tuple(int(v) for v in row)) for row in X], dtype=np.int8)
    raise UsageError(f"not an evaluable function: {F!r}")


def points_from_ints(values: np.ndarray, n: int) -> np.ndarray:
    """Bit ``i`` of each integer set means ``x_{i+1} = -1``."""
    values = np.asarray(values, dtype=np.int64)
    out = np.empty((values.shape[0], n), dtype=np.int8)
    for i in range(n):
        out[:, i] = 1 - 2 * ((values >> i) & 1).astype(np.int8)
    return out


def truth_table(F, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``F`` on every point, indexed by :func:`points_from_ints` order."""
    if (1 << n) > cap:
        raise CapExceededError("cube size", 1 << n, cap)
    f = as_batch(F)
    out = np.empty(1 << n, dtype=np.int8)
    for start, count in streams.chunks(1 << n, CHUNK):
        out[start:start + count] = f(points_from_ints(np.arange(start, start + count), n))
    return out


def _parallel_sum(task, ranges, workers: int) -> int:
    if workers <= 1:
        return sum(task(r) for r in ranges)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(task, ranges))


def exact_uniform_expectation(F, n: int, cap: int = DEFAULT_CAP, workers: int = 1) -> ExpectationEstimate:
    if (1 << n) > cap:
        raise CapExceededError("cube size", 1 << n, cap)
    f = as_batch(F)

    def task(rng):
        start, count = rng
        return int(f(points_from_ints(np.arange(start, start + count), n)).astype(np.int64).sum())

    total = _parallel_sum(task, list(streams.chunks(1 << n, CHUNK)), workers)
    return ExpectationEstimate(Fraction(total, 1 << n), EXACT_UNIFORM, 0.0, 1 << n)


def _enumerated_gen_sum(F, p: GenParams, workers: int) -> int:
    f = as_batch(F)

    def task(rng):
        start, count = rng
        Y = generate_words(p, bits.counter_words(start, count))
        return int(f(Y).astype(np.int64).sum())

    return _parallel_sum(task, list(streams.chunks(1 << p.seed_len_bits, CHUNK)), workers)


def gen_support(p: GenParams, buckets: np.ndarray, rows: list[int], level: Optional[int] = None) -> list[int]:
    """Basis of the output subspace for one fixed hash (0-indexed buckets).

    Buckets below ``level`` (default: all of them) are filled by the bucket
    generator, the rest uniformly. With the hash fixed the output is a
    GF(2)-linear image of uniform bits, hence uniform over this subspace.
    """
    level = p.ell if level is None else level
    vectors = []
    for b in range(p.ell):
        members = [i for i in range(p.n) if buckets[i] == b]
        if b >= level:
            vectors.extend(1 << i for i in members)
            continue
        for j in range(p.bucket_bits):
            v = 0
            for i in members:
                if (rows[i] >> j) & 1:
                    v |= 1 << i
            if v:
                vectors.append(v)
    return bits.gf2_basis(vectors)


def linear_numerator(F, p: GenParams, cap: int = DEFAULT_CAP, level: Optional[int] = None,
                     hash_coeffs: Optional[np.ndarray] = None) -> tuple[int, int]:
    """``(numerator, denominator)`` of the exact mean of ``F`` when buckets
    below ``level`` are pseudorandom and the rest uniform.

    Hash seeds are enumerated (or the single ``hash_coeffs`` row is used) and
    ``F`` is averaged over each hash's output subspace.
    """
    level = p.ell if level is None else level
    if hash_coeffs is None:
        hash_total = 1 << p.hash_bits
        if hash_total > cap:
            raise CapExceededError("hash seed space", hash_total, cap)
        batches = (
            bits.coefficient_block(bits.counter_words(start, count), 0, p.r_hash, p.m_hash)
            for start, count in streams.chunks(hash_total, CHUNK)
        )
    else:
        hash_total = 1
        batches = iter([np.asarray(hash_coeffs, dtype=np.uint64).reshape(1, p.r_hash)])
    table = truth_table(F, p.n, cap).astype(np.int64)
    full_sum = int(table.sum())
    rows = linear_rows(p.bucket_spec)
    numerator = 0
    cache: dict[bytes, int] = {}
    for coeffs in batches:
        buckets = hash_buckets(p, coeffs)
        sizes = np.stack([(buckets == b).sum(axis=1) for b in range(level)], axis=1) if level else None
        # any r_bucket rows of an r_bucket-wise independent generator are independent
        if sizes is None:
            full = np.ones(buckets.shape[0], dtype=bool)
        else:
            full = (sizes <= p.r_bucket).all(axis=1)
        numerator += int(full.sum()) * full_sum
        for row in np.flatnonzero(~full):
            key = buckets[row].tobytes()
            if key not in cache:
                basis = gen_support(p, buckets[row], rows, level)
                pts = bits.span(basis)
                cache[key] = int(table[pts].sum()) << (p.n - len(basis))
            numerator += cache[key]
    return numerator, hash_total << p.n


def exact_gen_expectation(F, p: GenParams, cap: int = DEFAULT_CAP, strategy: str = "auto",
                          workers: int = 1) -> ExpectationEstimate:
    """Exact mean of ``F`` over all generator seeds.

    ``enumerate`` streams every seed through the generator (seed space within
    ``cap``). ``linear`` enumerates only hash seeds and averages over the
    per-hash output subspace (hash seeds and ``2**n`` within ``cap``).
    ``auto`` picks the first that fits.
    """
    total = 1 << p.seed_len_bits
    if strategy == "auto":
        strategy = "enumerate" if total <= cap else "linear"
    if strategy == "enumerate":
        if total > cap:
            raise CapExceededError("seed space", total, cap)
        value = Fraction(_enumerated_gen_sum(F, p, workers), total)
    elif strategy == "linear":
        value = Fraction(*linear_numerator(F, p, cap))
    else:
        raise UsageError(f"unknown strategy {strategy!r}")
    return ExpectationEstimate(value, EXACT_SEEDS, 0.0, total)


def mc_gen_expectation(F, p: GenParams, N: int, stream_id: int = 0, alpha: float = DEFAULT_ALPHA,
                       workers: int = 1) -> ExpectationEstimate:
    if N < 1:
        raise ParameterError("need at least one sample")
    f = as_batch(F)
    stream = streams.CounterStream(stream_id, streams.SEEDS)
    per_sample = -(-p.seed_len_bits // 64)

    def task(rng):
        start, count = rng
        Y = generate_words(p, stream.words(start, count, per_sample))
        return int(f(Y).astype(np.int64).sum())

    total = _parallel_sum(task, list(streams.chunks(N, CHUNK)), workers)
    return ExpectationEstimate(total / N, MONTE_CARLO_SEEDS,
                               hoeffding_halfwidth(N, alpha, value_range=2.0), N, stream_id)


@dataclass(frozen=True)
class FoolingReport:
    err: Union[Fraction, float]
    e_gen: ExpectationEstimate
    e_uniform: ExpectationEstimate
    uncertainty: float
    mode: str
    params: GenParams

    def to_dict(self) -> dict:
        out = {
            "err": float(self.err),
            "e_gen": self.e_gen.to_dict(),
            "e_uniform": self.e_uniform.to_dict(),
            "method": self.mode,
            "uncertainty": self.uncertainty,
            "params": self.params.to_dict(),
        }
        if isinstance(self.err, Fraction):
            out["err_exact"] = format_rational(self.err)
        return out


FOOLING_MODES = ("exact-both", "exact-uniform+mc")


def fooling_error(F, p: GenParams, mode: str = "exact-both", N: int = 100_000, stream_id: int = 0,
                  alpha: float = DEFAULT_ALPHA, cap: int = DEFAULT_CAP, strategy: str = "auto",
                  workers: int = 1) -> FoolingReport:
    e_uniform = exact_uniform_expectation(F, p.n, cap, workers)
    if mode == "exact-both":
        e_gen = exact_gen_expectation(F, p, cap, strategy, workers)
    elif mode == "exact-uniform+mc":
        e_gen = mc_gen_expectation(F, p, N, stream_id, alpha, workers)
    else:
        raise UsageError(f"unknown fooling mode {mode!r}; expected one of {FOOLING_MODES}")
    err = abs(e_gen.value - e_uniform.value)
    return FoolingReport(err, e_gen, e_uniform, e_gen.error + e_uniform.error, mode, p)


@dataclass(frozen=True)
class CountReport:
    n: int
    satisfying_estimate: Union[Fraction, float]
    expectation: ExpectationEstimate
    exact: bool

    @property
    def uncertainty(self) -> float:
        return (1 << self.n) * self.expectation.error / 2

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "satisfying_estimate": float(self.satisfying_estimate),
            "uncertainty": self.uncertainty,
            "expectation": self.expectation.to_dict(),
            "exact": self.exact,
        }
        if isinstance(self.satisfying_estimate, Fraction):
            out["satisfying_estimate_exact"] = format_rational(self.satisfying_estimate)
        return out


COUNT_MODES = ("exact-seeds", "mc-seeds", "exact-uniform")


def approx_count(F, p: GenParams, mode: str = "exact-seeds", N: int = 100_000, stream_id: int = 0,
                 alpha: float = DEFAULT_ALPHA, cap: int = DEFAULT_CAP, strategy: str = "auto",
                 workers: int = 1) -> CountReport:
    """Satisfying-assignment count ``2^n (1 - E) / 2`` with ``-1`` as True.

    ``exact-uniform`` substitutes the true uniform expectation for the
    generator's, which makes the count exact.
    """
    if mode == "exact-seeds":
        e = exact_gen_expectation(F, p, cap, strategy, workers)
    elif mode == "mc-seeds":
        e = mc_gen_expectation(F, p, N, stream_id, alpha, workers)
    elif mode == "exact-uniform":
        e = exact_uniform_expectation(F, p.n, cap, workers)
    else:
        raise UsageError(f"unknown count mode {mode!r}; expected one of {COUNT_MODES}")
    size = 1 << p.n
    if e.exact:
        estimate = size * (1 - e.value) / 2
    else:
        estimate = size * (1.0 - e.value) / 2.0
    return CountReport(p.n, estimate, e, e.exact)


def ip_to_intersection(ip: Union[Problem, dict, str]) -> Intersection:
    """Constraints ``w . b <= c`` over ``b in {0,1}^n`` as LTFs in ``x = 2b - 1``.

    ``w . b <= c`` iff ``w . x <= 2c - sum(w)``, i.e. the LTF with that
    threshold is True (``-1``) exactly on the feasible points.
    """
    problem = ip if isinstance(ip, Problem) else load_problem(ip)
    if problem.vars != "zeroone":
        raise ParameterError(f"expected a zeroone program, got vars={problem.vars!r}")
    return Intersection(Ltf(w, 2 * c - sum(w)) for w, c in problem.constraints)


def problem_function(problem: Problem) -> Intersection:
    if problem.vars == "zeroone":
        return ip_to_intersection(problem)
    return Intersection(Ltf(w, t) for w, t in problem.constraints)
