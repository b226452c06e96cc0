"""Empirical counterparts of the analysis: hybrid distributions, the bucket
mass statistic, region classification, invariance and strip probabilities,
and bounded-independence fooling of CNFs.

Every comparison against an asymptotic bound uses unit constants and is
labelled HEURISTIC. A breach is logged and reported, never raised.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from . import bits, streams
from .errors import CapExceededError, ParameterError, UsageError
from .eval_count import (
    DEFAULT_CAP,
    ExpectationEstimate,
    EXACT_SEEDS,
    EXACT_UNIFORM,
    MONTE_CARLO_SEEDS,
    as_batch,
    exact_uniform_expectation,
    hoeffding_halfwidth,
    linear_numerator,
    points_from_ints,
    truth_table,
)
from .kwise import KWiseSeed, bit_codes, linear_rows, make_bitgen
from .ltf import CnfFormula, Intersection
from .prggen import GenParams, generate_batch, generate_words, hash_buckets, split_words

log = logging.getLogger(__name__)

NORM_TOL = 1e-12


def _log_k(k: int) -> float:
    return max(1.0, math.log2(k)) if k >= 1 else 1.0


# -- hybrids -------------------------------------------------------------------

@dataclass(frozen=True)
class HybridSpec:
    """Buckets ``1..b`` pseudorandom, ``b+1..ell`` uniform.

    ``hash_seed=None`` means the hash is drawn afresh (averaged over the family).
    """

    p: GenParams
    hash_seed: Optional[KWiseSeed]
    b: int

    def __post_init__(self):
        if not 0 <= self.b <= self.p.ell:
            raise ParameterError(f"hybrid level {self.b} outside [0, {self.p.ell}]")
        if self.hash_seed is not None and len(self.hash_seed.coeffs) != self.p.r_hash:
            raise UsageError("hash seed length does not match r_hash")


def hybrid_sample_batch(spec: HybridSpec, stream_id: int, start: int, count: int) -> np.ndarray:
    """Samples ``start..start+count-1`` of the hybrid, one per row.

    Each sample reads a full generator seed (every bucket gets its own fresh
    bucket seed) followed by ``n`` uniform bits from the stream.
    """
    p = spec.p
    per_sample = -(-(p.seed_len_bits + p.n) // 64)
    words = streams.CounterStream(stream_id, streams.UNIFORM_FILL).words(start, count, per_sample)
    hash_coeffs, bucket_coeffs = split_words(p, words)
    if spec.hash_seed is not None:
        hash_coeffs = np.tile(np.array(spec.hash_seed.values, dtype=np.uint64), (count, 1))
    pseudo = generate_batch(p, hash_coeffs, bucket_coeffs)
    uniform = np.empty((count, p.n), dtype=np.int8)
    for i in range(p.n):
        bit = bits.extract_bits(words, p.seed_len_bits + i, 1)
        uniform[:, i] = 1 - 2 * bit.astype(np.int8)
    live = hash_buckets(p, hash_coeffs) < spec.b
    return np.where(live, pseudo, uniform).astype(np.int8)


def hybrid_sample(spec: HybridSpec, stream_id: int = 0, index: int = 0) -> list[int]:
    return [int(v) for v in hybrid_sample_batch(spec, stream_id, index, 1)[0]]


@dataclass(frozen=True)
class Distribution:
    """Exact distribution over ``{-1,1}^n`` as integer weights over a common
    denominator, indexed like :func:`~halfspace_prg.eval_count.points_from_ints`."""

    weights: tuple[int, ...]
    denominator: int

    def probability(self, index: int) -> Fraction:
        return Fraction(self.weights[index], self.denominator)

    def total_variation(self, other: "Distribution") -> Fraction:
        if len(self.weights) != len(other.weights):
            raise UsageError("distributions live on different cubes")
        num = sum(abs(a * other.denominator - b * self.denominator)
                  for a, b in zip(self.weights, other.weights))
        return Fraction(num, 2 * self.denominator * other.denominator)


def _check_cube(n: int, cap: int) -> None:
    if (1 << n) > cap:
        raise CapExceededError("cube size", 1 << n, cap)


def _bucket_histogram(p: GenParams, members: list[int], cap: int) -> dict[int, int]:
    """Counts of bucket-generator output patterns on ``members`` over all its seeds."""
    total = 1 << p.bucket_bits
    if total > cap:
        raise CapExceededError("bucket seed space", total, cap)
    spec = p.bucket_spec
    hist: dict[int, int] = {}
    for start, count in streams.chunks(total, 1 << 15):
        coeffs = bits.coefficient_block(bits.counter_words(start, count), 0, p.r_bucket, p.m_bucket)
        out = bit_codes(spec, coeffs).astype(np.int64)
        code = np.zeros(count, dtype=np.int64)
        for i in members:
            code |= out[:, i] << i
        values, counts = np.unique(code, return_counts=True)
        for v, c in zip(values, counts):
            hist[int(v)] = hist.get(int(v), 0) + int(c)
    return hist


def _fixed_hash_distribution(p: GenParams, buckets: Sequence[int], b: int, cap: int) -> list[int]:
    """Weights over ``2^n`` with denominator ``2^(ell * (bucket_bits + n))``."""
    per_bucket = p.bucket_bits + p.n
    weights = {0: 1}
    for c in range(p.ell):
        members = [i for i in range(p.n) if buckets[i] == c]
        if c < b:
            hist = _bucket_histogram(p, members, cap)
            factor = {v: cnt << p.n for v, cnt in hist.items()}
        else:
            scale = 1 << (per_bucket - len(members))
            factor = {}
            for pattern in range(1 << len(members)):
                v = 0
                for pos, i in enumerate(members):
                    if (pattern >> pos) & 1:
                        v |= 1 << i
                factor[v] = scale
        weights = {u | v: wu * wv for u, wu in weights.items() for v, wv in factor.items()}
    dense = [0] * (1 << p.n)
    for v, w in weights.items():
        dense[v] = w
    return dense


def hybrid_distribution(p: GenParams, b: int, hash_seed: Optional[KWiseSeed] = None,
                        cap: int = DEFAULT_CAP) -> Distribution:
    """Exact law of the hybrid by enumerating every bucket seed of every live
    bucket (and every hash seed when ``hash_seed`` is None)."""
    _check_cube(p.n, cap)
    HybridSpec(p, hash_seed, b)
    if hash_seed is not None:
        hashes = np.array([hash_seed.values], dtype=np.uint64)
    else:
        if (1 << p.hash_bits) > cap:
            raise CapExceededError("hash seed space", 1 << p.hash_bits, cap)
        hashes = bits.coefficient_block(bits.counter_words(0, 1 << p.hash_bits), 0, p.r_hash, p.m_hash)
    all_buckets = hash_buckets(p, hashes)
    total = [0] * (1 << p.n)
    cache: dict[bytes, list[int]] = {}
    for row in all_buckets:
        key = row.tobytes()
        if key not in cache:
            cache[key] = _fixed_hash_distribution(p, row, b, cap)
        for idx, w in enumerate(cache[key]):
            total[idx] += w
    denom = len(all_buckets) << (p.ell * (p.bucket_bits + p.n))
    return Distribution(tuple(total), denom)


def gen_distribution(p: GenParams, cap: int = DEFAULT_CAP) -> Distribution:
    """Exact output law of the generator by streaming every seed."""
    _check_cube(p.n, cap)
    seeds = 1 << p.seed_len_bits
    if seeds > cap:
        raise CapExceededError("seed space", seeds, cap)
    counts = np.zeros(1 << p.n, dtype=np.int64)
    weights = (1 << np.arange(p.n, dtype=np.int64))
    for start, count in streams.chunks(seeds, 1 << 15):
        Y = generate_words(p, bits.counter_words(start, count))
        index = ((1 - Y.astype(np.int64)) // 2) @ weights
        counts += np.bincount(index, minlength=1 << p.n)
    return Distribution(tuple(int(c) for c in counts), seeds)


def uniform_distribution(n: int) -> Distribution:
    return Distribution(tuple([1] * (1 << n)), 1 << n)


@dataclass(frozen=True)
class HybridPoint:
    b: int
    estimate: ExpectationEstimate

    def to_row(self, p: GenParams) -> dict:
        e = self.estimate
        return {
            "b": self.b,
            "value": float(e.value),
            "error": e.error,
            "method": e.method,
            "sample_count": e.sample_count,
            "rng_stream_id": e.rng_stream_id,
            "params": p.to_json(),
        }


def hybrid_scan(F, p: GenParams, mode: str = "exact", N: int = 100_000, stream_id: int = 0,
                alpha: float = 0.05, cap: int = DEFAULT_CAP,
                hash_seed: Optional[KWiseSeed] = None) -> list[HybridPoint]:
    """``E[F(X^{h,b})]`` for ``b = 0..ell``."""
    out = []
    if mode == "exact":
        hc = None if hash_seed is None else np.array(hash_seed.values, dtype=np.uint64)
        for b in range(p.ell + 1):
            num, den = linear_numerator(F, p, cap, level=b, hash_coeffs=hc)
            method = EXACT_UNIFORM if b == 0 else EXACT_SEEDS
            out.append(HybridPoint(b, ExpectationEstimate(Fraction(num, den), method, 0.0, den)))
    elif mode == "mc":
        f = as_batch(F)
        halfwidth = hoeffding_halfwidth(N, alpha, value_range=2.0)
        for b in range(p.ell + 1):
            spec = HybridSpec(p, hash_seed, b)
            total = 0
            for start, count in streams.chunks(N, 1 << 15):
                total += int(f(hybrid_sample_batch(spec, stream_id, start, count)).astype(np.int64).sum())
            out.append(HybridPoint(b, ExpectationEstimate(total / N, MONTE_CARLO_SEEDS, halfwidth, N, stream_id)))
    else:
        raise UsageError(f"unknown hybrid-scan mode {mode!r}")
    return out


# -- bucket statistic ------------------------------------------------------------

def _check_columns(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise UsageError("W must be an (n, k) matrix")
    norms = np.linalg.norm(W, axis=0)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise UsageError(f"columns of W must have unit norm, got norms {norms}")
    return W


def bucket_statistic(W: np.ndarray, buckets: Sequence[int], b: int, k: Optional[int] = None) -> float:
    """``(sum_j |W^j restricted to bucket b|^(4 L))^(1/L)`` with ``L = max(1, log2 k)``.

    ``buckets`` holds the 1-indexed bucket of every coordinate.
    """
    W = _check_columns(W)
    k = W.shape[1] if k is None else k
    L = _log_k(k)
    members = np.asarray(buckets) == b
    if not members.any():
        return 0.0
    sq = (W[members] ** 2).sum(axis=0)
    return float(np.sum(sq ** (2 * L)) ** (1 / L))


def lemma_bound(k: int, tau: float) -> float:
    """``4 log k * tau log(1/tau)`` in base 2 (HEURISTIC, unit constant)."""
    return 4 * _log_k(k) * tau * math.log2(1 / tau)


@dataclass(frozen=True)
class BucketReport:
    per_bucket: tuple[float, ...]
    total: float
    bound: float

    def to_rows(self, params: Optional[GenParams] = None) -> list[dict]:
        tag = params.to_json() if params is not None else ""
        return [{"bucket": b + 1, "h": v, "params": tag} for b, v in enumerate(self.per_bucket)]


def bucket_report(W: np.ndarray, buckets: Sequence[int], ell: int, tau: Optional[float] = None) -> BucketReport:
    W = _check_columns(W)
    k = W.shape[1]
    per = tuple(bucket_statistic(W, buckets, b, k) for b in range(1, ell + 1))
    tau = 1 / ell if tau is None else tau
    return BucketReport(per, math.fsum(per), lemma_bound(k, tau))


def expected_bucket_statistic(W: np.ndarray, p: GenParams, N: int = 1000, stream_id: int = 0) -> dict:
    """Mean of ``sum_b h(W, b)`` over sampled hash seeds, with the bound at ``tau = 1/ell``."""
    W = _check_columns(W)
    k = W.shape[1]
    stream = streams.CounterStream(stream_id, streams.HASH_SAMPLES)
    words = stream.words(0, N, -(-p.hash_bits // 64))
    coeffs = bits.coefficient_block(words, 0, p.r_hash, p.m_hash)
    assignments = hash_buckets(p, coeffs) + 1
    totals = np.array([bucket_report(W, row, p.ell).total for row in assignments])
    tau = 1 / p.ell
    bound = lemma_bound(k, tau)
    estimate = float(np.mean(totals))
    stderr = float(np.std(totals, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    breach = estimate > bound
    if breach:
        log.warning("HEURISTIC bound breach: E_h[sum_b h(W,b)] = %.4g > %.4g", estimate, bound)
    return {
        "label": "HEURISTIC",
        "estimate": estimate,
        "stderr": stderr,
        "bound": bound,
        "breach": breach,
        "tau": tau,
        "k": k,
        "samples": N,
        "rng_stream_id": stream_id,
    }


# -- regions -----------------------------------------------------------------------

class RegionLabel(enum.Enum):
    INNER = "Inner"
    OUTER = "Outer"
    STRIP = "Strip"


def _check_lambda(lam) -> None:
    lam = np.asarray(lam, dtype=np.float64)
    if not ((lam > 0) & (lam < 1)).all():
        raise ParameterError(f"lambda must lie in (0, 1), got {lam if lam.ndim == 0 else 'an array outside it'}")


def classify_region(v: Sequence[float], theta: Sequence[float], lam: float) -> RegionLabel:
    _check_lambda(lam)
    if len(v) != len(theta):
        raise UsageError("v and theta differ in length")
    if all(a <= t for a, t in zip(v, theta)):
        return RegionLabel.INNER
    if any(a >= t + lam for a, t in zip(v, theta)):
        return RegionLabel.OUTER
    return RegionLabel.STRIP


def classify_regions(V: np.ndarray, theta: np.ndarray, lam) -> np.ndarray:
    """Vectorized labels: 0 Inner, 1 Outer, 2 Strip, one per row of ``V``.

    ``theta`` broadcasts against ``V``; ``lam`` is a scalar or one value per row.
    """
    _check_lambda(lam)
    V = np.asarray(V, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim == 1:
        lam = lam[:, None]
    inner = (V <= theta).all(axis=1)
    outer = (V >= np.asarray(theta) + lam).any(axis=1)
    return np.where(inner, 0, np.where(outer, 1, 2))


def _gaussian_projection(W: np.ndarray, N: int, stream_id: int) -> np.ndarray:
    stream = streams.CounterStream(stream_id, streams.GAUSSIAN)
    out = np.empty((N, W.shape[1]))
    for start, count in streams.chunks(N, 1 << 14):
        out[start:start + count] = stream.normals(start, count, W.shape[0]) @ W
    return out


def _resolve_polytope(W, theta):
    """``(W, theta, exact_function)`` from a matrix or an :class:`Intersection`."""
    if isinstance(W, Intersection):
        return W.weight_matrix(), W.scaled_thresholds(), W
    W = _check_columns(W)
    return W, np.asarray(theta, dtype=np.float64), None


def invariance_gap_mc(W, theta=None, N: int = 100_000, stream_id: int = 0,
                      cap: int = 1 << 20, tau: Optional[float] = None) -> dict:
    """``|Pr_U[W^T U in Inner] - Pr_G[W^T G in Inner]|``.

    ``W`` may be an :class:`Intersection`, in which case the uniform side is
    evaluated with exact arithmetic. The uniform side is exact when ``2^n``
    fits in ``cap``; otherwise it is sampled too.
    """
    W, theta, exact_F = _resolve_polytope(W, theta)
    n, k = W.shape
    if (1 << n) <= cap:
        if exact_F is not None:
            table = truth_table(exact_F, n, cap)
            p_unif = float(np.count_nonzero(table == -1)) / (1 << n)
        else:
            inside = 0
            for start, count in streams.chunks(1 << n, 1 << 15):
                X = points_from_ints(np.arange(start, start + count), n)
                inside += int((X @ W <= theta + NORM_TOL).all(axis=1).sum())
            p_unif = inside / (1 << n)
        sigma_unif = 0.0
        uniform_method = EXACT_UNIFORM
    else:
        stream = streams.CounterStream(stream_id, streams.POINTS)
        inside = 0
        for start, count in streams.chunks(N, 1 << 14):
            X = stream.signs(start, count, n)
            if exact_F is not None:
                inside += int(np.count_nonzero(exact_F.evaluate_batch(X) == -1))
            else:
                inside += int((X @ W <= theta + NORM_TOL).all(axis=1).sum())
        p_unif = inside / N
        sigma_unif = math.sqrt(p_unif * (1 - p_unif) / N)
        uniform_method = "MonteCarloUniform"
    V = _gaussian_projection(W, N, stream_id)
    p_gauss = float((V <= theta).all(axis=1).mean())
    sigma_gauss = math.sqrt(p_gauss * (1 - p_gauss) / N)
    if tau is None:
        tau = float(np.sqrt((W ** 4).sum(axis=0)).max())
    L = math.log2(k + 2)
    bound = L ** 1.6 * (tau * math.log(1 / tau)) ** 0.2 if 0 < tau < 1 else float("inf")
    gap = abs(p_unif - p_gauss)
    return {
        "label": "HEURISTIC",
        "p_uniform": p_unif,
        "p_uniform_method": uniform_method,
        "p_gaussian": p_gauss,
        "gap": gap,
        "sigma": math.hypot(sigma_unif, sigma_gauss),
        "bound": bound,
        "breach": gap > bound,
        "tau": tau,
        "samples": N,
        "rng_stream_id": stream_id,
        "inverse_cdf": streams.INVERSE_CDF,
    }


def strip_probability_mc(W, theta=None, lam: float = 0.1, N: int = 100_000, stream_id: int = 0) -> dict:
    _check_lambda(lam)
    W, theta, _ = _resolve_polytope(W, theta)
    k = W.shape[1]
    V = _gaussian_projection(W, N, stream_id)
    est = float(np.mean(classify_regions(V, theta, lam) == 2))
    sigma = math.sqrt(max(est * (1 - est), 1.0 / N) / N)
    bound = lam * math.sqrt(math.log2(k + 2))
    if est > bound:
        log.warning("HEURISTIC bound breach: strip probability %.4g > %.4g", est, bound)
    return {
        "label": "HEURISTIC",
        "estimate": est,
        "sigma": sigma,
        "bound": bound,
        "breach": est > bound,
        "lambda": lam,
        "samples": N,
        "rng_stream_id": stream_id,
        "inverse_cdf": streams.INVERSE_CDF,
    }


# -- bounded independence vs CNFs -------------------------------------------------

def br_heuristic_delta(M: int, r: int) -> float:
    """The delta solving ``r = (log2(M / delta))^2``."""
    return M / 2 ** math.sqrt(r)


def bitgen_distribution_support(n: int, r: int) -> tuple[list[int], int]:
    """Basis of the r-wise generator's output subspace and its seed-bit count."""
    spec = make_bitgen(n, r)
    rows = linear_rows(spec)
    columns = []
    for j in range(spec.seed_bits):
        v = 0
        for i in range(n):
            if (rows[i] >> j) & 1:
                v |= 1 << i
        columns.append(v)
    return bits.gf2_basis(columns), spec.seed_bits


def br_fooling_test(G: CnfFormula, r: int, n: Optional[int] = None, cap: int = DEFAULT_CAP,
                    strategy: str = "auto") -> dict:
    """Exact ``|E_Z[G] - E_U[G]|`` for the r-wise independent sign generator.

    ``enumerate`` runs every generator seed; ``linear`` averages over the
    generator's output subspace (the output is a GF(2)-linear image of the
    uniform seed). ``auto`` enumerates when the seed space fits in ``cap``.
    """
    n = G.n if n is None else n
    if n != G.n:
        raise UsageError(f"CNF is over {G.n} variables, not {n}")
    spec = make_bitgen(n, r)
    seeds = 1 << spec.seed_bits
    e_unif = exact_uniform_expectation(G, n, cap).value
    if strategy == "auto":
        strategy = "enumerate" if seeds <= cap else "linear"
    if strategy == "enumerate":
        if seeds > cap:
            raise CapExceededError("generator seed space", seeds, cap)
        total = 0
        for start, count in streams.chunks(seeds, 1 << 15):
            coeffs = bits.coefficient_block(bits.counter_words(start, count), 0, spec.r, spec.m)
            Y = (1 - 2 * bit_codes(spec, coeffs)).astype(np.int8)
            total += int(G.evaluate_batch(Y).astype(np.int64).sum())
        e_gen = Fraction(total, seeds)
    elif strategy == "linear":
        table = truth_table(G, n, cap).astype(np.int64)
        basis, _ = bitgen_distribution_support(n, r)
        pts = bits.span(basis)
        e_gen = Fraction(int(table[pts].sum()), len(pts))
    else:
        raise UsageError(f"unknown strategy {strategy!r}")
    error = abs(e_gen - e_unif)
    M = max(1, len(G.clauses))
    delta = br_heuristic_delta(M, r)
    breach = float(error) > delta
    if breach:
        log.warning("HEURISTIC bound breach: BR error %.4g > %.4g (M=%d, r=%d)", float(error), delta, M, r)
    return {
        "error": error,
        "e_gen": e_gen,
        "e_uniform": e_unif,
        "r": r,
        "m": spec.m,
        "n": n,
        "clauses": len(G.clauses),
        "method": strategy,
        "heuristic_delta": delta,
        "breach": breach,
        "label": "HEURISTIC",
    }
