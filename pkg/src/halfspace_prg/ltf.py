"""Integer-weight threshold functions, their intersections, and CNF rewrites.

Conventions: ``sign(z) = +1`` iff ``z > 0``, so a zero argument gives ``-1``;
``-1`` encodes True. Thresholds are exact :class:`fractions.Fraction` values and
every comparison is done in integer arithmetic.

All evaluators take a point as a sequence of ``+-1`` ints, and every function
object offers ``evaluate_batch`` on an ``(N, n)`` integer array for the
enumeration and sampling code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ClassificationError, ParameterError, UsageError

DEFAULT_CNF_CAP = 20


def parse_rational(value) -> Fraction:
    """Accept ints, floats, Fractions, and ``"p/q"`` / decimal strings."""
    if isinstance(value, bool):
        raise ParameterError(f"not a rational: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ParameterError(f"not a finite rational: {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"cannot parse rational {value!r}") from exc
    raise ParameterError(f"not a rational: {value!r}")


def parse_weight(value) -> int:
    if isinstance(value, bool):
        raise ParameterError(f"weight must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise ParameterError(f"weight must be an integer, got {value!r}")


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _as_point(x, n: int) -> tuple[int, ...]:
    x = tuple(int(v) for v in x)
    if len(x) != n:
        raise UsageError(f"point has length {len(x)}, expected {n}")
    return x


@dataclass(frozen=True)
class Ltf:
    weights: tuple[int, ...]
    theta: Fraction

    def __init__(self, weights: Iterable, theta=0):
        object.__setattr__(self, "weights", tuple(parse_weight(w) for w in weights))
        object.__setattr__(self, "theta", parse_rational(theta))
        if not self.weights:
            raise UsageError("an LTF needs at least one coordinate")

    @property
    def n(self) -> int:
        return len(self.weights)

    def evaluate(self, x) -> int:
        x = _as_point(x, self.n)
        dot = sum(w * v for w, v in zip(self.weights, x))
        return 1 if dot - self.theta > 0 else -1

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        if X.shape[-1] != self.n:
            raise UsageError(f"points have length {X.shape[-1]}, expected {self.n}")
        dot = X.astype(np.int64) @ np.asarray(self.weights, dtype=np.int64)
        p, q = self.theta.numerator, self.theta.denominator
        return np.where(q * dot - p > 0, 1, -1).astype(np.int8)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "theta": format_rational(self.theta)}


@dataclass(frozen=True)
class NormalizedLtf:
    source: Ltf
    unit_weights: tuple[float, ...]
    theta_scaled: float
    norm: float

    @classmethod
    def of(cls, f: Ltf) -> "NormalizedLtf":
        sq = sum(w * w for w in f.weights)
        if sq == 0:
            raise ParameterError("cannot normalize an all-zero weight vector")
        norm = math.sqrt(sq)
        return cls(f, tuple(w / norm for w in f.weights), float(f.theta) / norm, norm)

    @property
    def n(self) -> int:
        return self.source.n

    def evaluate(self, x) -> int:
        return self.source.evaluate(x)

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        return self.source.evaluate_batch(X)


@dataclass(frozen=True)
class Intersection:
    ltfs: tuple[Ltf, ...]

    def __init__(self, ltfs: Iterable[Ltf]):
        ltfs = tuple(ltfs)
        if not ltfs:
            raise UsageError("an intersection needs at least one LTF")
        if len({f.n for f in ltfs}) != 1:
            raise UsageError("intersection members must share n")
        object.__setattr__(self, "ltfs", ltfs)

    @property
    def n(self) -> int:
        return self.ltfs[0].n

    @property
    def k(self) -> int:
        return len(self.ltfs)

    def evaluate(self, x) -> int:
        x = _as_point(x, self.n)
        return -1 if all(f.evaluate(x) == -1 for f in self.ltfs) else 1

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        out = np.full(np.asarray(X).shape[0], -1, dtype=np.int8)
        for f in self.ltfs:
            out = np.maximum(out, f.evaluate_batch(X))
        return out

    def weight_matrix(self) -> np.ndarray:
        """Unit-norm columns ``W`` (shape ``(n, k)``); members must be nonconstant."""
        return np.column_stack([NormalizedLtf.of(f).unit_weights for f in self.ltfs])

    def scaled_thresholds(self) -> np.ndarray:
        return np.array([NormalizedLtf.of(f).theta_scaled for f in self.ltfs])


Literal = tuple[int, int]


@dataclass(frozen=True)
class CnfFormula:
    """Conjunction of clauses; literal ``(i, p)`` holds when ``x_i == p``."""

    clauses: tuple[frozenset, ...]
    n: int
    width: int

    def __init__(self, clauses: Iterable[Iterable[Literal]], n: int, width: int | None = None):
        norm = []
        for clause in clauses:
            lits = frozenset((int(i), int(p)) for i, p in clause)
            for i, p in lits:
                if p not in (-1, 1):
                    raise UsageError(f"literal polarity must be +-1, got {p}")
                if not 1 <= i <= n:
                    raise UsageError(f"variable {i} outside [1, {n}]")
                if (i, -p) in lits:
                    raise UsageError(f"clause contains both polarities of x{i}")
            norm.append(lits)
        actual = max((len(c) for c in norm), default=0)
        if width is None:
            width = actual
        elif actual > width:
            raise UsageError(f"clause of width {actual} exceeds declared width {width}")
        object.__setattr__(self, "clauses", tuple(norm))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "width", width)

    def evaluate(self, x) -> int:
        x = _as_point(x, self.n)
        ok = all(any(x[i - 1] == p for i, p in clause) for clause in self.clauses)
        return -1 if ok else 1

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        if X.shape[-1] != self.n:
            raise UsageError(f"points have length {X.shape[-1]}, expected {self.n}")
        sat = np.ones(X.shape[0], dtype=bool)
        for clause in self.clauses:
            hit = np.zeros(X.shape[0], dtype=bool)
            for i, p in clause:
                hit |= X[:, i - 1] == p
            sat &= hit
        return np.where(sat, -1, 1).astype(np.int8)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "width": self.width,
            "clauses": [sorted([i, p] for i, p in c) for c in self.clauses],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CnfFormula":
        return cls([[tuple(lit) for lit in c] for c in data["clauses"]], int(data["n"]), data.get("width"))


@dataclass(frozen=True)
class CnfLtf:
    regular_part: tuple[NormalizedLtf, ...]
    cnf_part: CnfFormula

    @property
    def n(self) -> int:
        return self.cnf_part.n

    def evaluate(self, x) -> int:
        if any(f.evaluate(x) == 1 for f in self.regular_part):
            return 1
        return self.cnf_part.evaluate(x)

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        out = self.cnf_part.evaluate_batch(X)
        for f in self.regular_part:
            out = np.maximum(out, f.evaluate_batch(X))
        return out


Evaluable = Union[Ltf, Intersection, CnfFormula, CnfLtf, NormalizedLtf]


def evaluate_ltf(f: Ltf, x) -> int:
    return f.evaluate(x)


def evaluate_intersection(F: Intersection, x) -> int:
    return F.evaluate(x)


def evaluate_cnf(G: CnfFormula, x) -> int:
    return G.evaluate(x)


# -- sparsity and regularity --------------------------------------------------

def weight_and_sparsity(f: Ltf) -> tuple[int, int]:
    return max(abs(w) for w in f.weights), sum(1 for w in f.weights if w)


def fourth_moment_ratio(f: Ltf) -> Fraction:
    """Exact ``sum(u_i^4)`` for the normalized weight vector ``u = w/|w|``."""
    sq = sum(w * w for w in f.weights)
    if sq == 0:
        raise ParameterError("regularity is undefined for the zero weight vector")
    return Fraction(sum(w ** 4 for w in f.weights), sq * sq)


def regularity_param(f: Ltf) -> float:
    """Least tau with ``f`` tau-regular after normalization."""
    ratio = fourth_moment_ratio(f)
    return math.sqrt(ratio.numerator) / math.sqrt(ratio.denominator)


def is_regular(f: Ltf, tau) -> bool:
    """Exact test of ``sum(u_i^4) <= tau^2``."""
    t = parse_rational(tau)
    return t >= 0 and fourth_moment_ratio(f) <= t * t


@dataclass(frozen=True)
class Sparse:
    sparsity: int


@dataclass(frozen=True)
class Regular:
    tau: float
    tau_squared: Fraction


def classify_dichotomy(f: Ltf, s: int) -> Union[Sparse, Regular]:
    """Sparse when at most ``s`` weights are nonzero, otherwise the guaranteed
    regularity level ``t / sqrt(s + 1)``."""
    t, sparsity = weight_and_sparsity(f)
    if sparsity == 0:
        raise ParameterError("dichotomy is undefined for the zero weight vector")
    if sparsity <= s:
        return Sparse(sparsity)
    tau_sq = Fraction(t * t, s + 1)
    if fourth_moment_ratio(f) > tau_sq:
        raise AssertionError(f"dichotomy bound violated for {f}")
    return Regular(t / math.sqrt(s + 1), tau_sq)


# -- CNF rewrite -------------------------------------------------------------

def sparse_to_cnf(f: Ltf, cap: int = DEFAULT_CNF_CAP) -> CnfFormula:
    """CNF over the relevant variables of ``f`` that agrees with it everywhere.

    An LTF is unate, so its clauses are exactly the minimal sets ``S`` of
    relevant variables such that pushing every ``x_i`` (``i in S``) toward
    ``sign(w_i)`` forces the output to False whatever the rest do. Each such
    ``S`` yields the clause ``OR_{i in S} (x_i == -sign(w_i))``. There are at
    most ``C(s, s//2) <= 2**s`` of them.
    """
    relevant = [i for i, w in enumerate(f.weights) if w]
    s = len(relevant)
    if s > cap:
        raise ParameterError(f"sparsity {s} exceeds CNF cap {cap}")
    mags = np.array([abs(f.weights[i]) for i in relevant], dtype=np.int64)
    total = int(mags.sum())
    p, q = f.theta.numerator, f.theta.denominator

    masks = np.arange(1 << s, dtype=np.int64)
    up = np.zeros(masks.shape, dtype=np.int64)
    lightest = np.full(masks.shape, np.iinfo(np.int64).max, dtype=np.int64)
    for pos in range(s):
        member = (masks >> pos) & 1 == 1
        up += np.where(member, mags[pos], 0)
        lightest = np.where(member, np.minimum(lightest, mags[pos]), lightest)
    # dot product in the worst case for "True" is 2*up - total
    forcing = q * (2 * up - total) - p > 0
    shrunk = q * (2 * (up - np.where(masks == 0, 0, lightest)) - total) - p > 0
    minimal = forcing & ~(shrunk & (masks != 0))

    clauses = []
    for mask in np.flatnonzero(minimal):
        clause = []
        for pos in range(s):
            if (mask >> pos) & 1:
                i = relevant[pos]
                clause.append((i + 1, -1 if f.weights[i] > 0 else 1))
        clauses.append(tuple(sorted(clause)))
    clauses.sort()
    return CnfFormula(clauses, f.n, s)


def decompose(F: Intersection, s: int, tau) -> CnfLtf:
    """Split ``F`` into tau-regular members and a CNF for the sparse members.

    A member that is both s-sparse and tau-regular goes to the CNF side.
    """
    regular = []
    clauses: list = []
    for index, f in enumerate(F.ltfs):
        _, sparsity = weight_and_sparsity(f)
        if sparsity <= s:
            clauses.extend(sparse_to_cnf(f, cap=max(s, DEFAULT_CNF_CAP)).clauses)
        elif is_regular(f, tau):
            regular.append(NormalizedLtf.of(f))
        else:
            raise ClassificationError(index, sparsity, regularity_param(f))
    return CnfLtf(tuple(regular), CnfFormula(clauses, F.n, s))


# -- problem files ------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    n: int
    vars: str
    constraints: tuple[tuple[tuple[int, ...], Fraction], ...]

    @classmethod
    def from_dict(cls, data: dict) -> "Problem":
        try:
            n = int(data["n"])
            kind = data.get("vars", "pm1")
            raw = data["constraints"]
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed problem: {exc}") from exc
        if kind not in ("pm1", "zeroone"):
            raise ParameterError(f"vars must be 'pm1' or 'zeroone', got {kind!r}")
        constraints = []
        for c in raw:
            weights = tuple(parse_weight(w) for w in c["weights"])
            if len(weights) != n:
                raise ParameterError(f"constraint has {len(weights)} weights, expected {n}")
            constraints.append((weights, parse_rational(c.get("theta", 0))))
        if not constraints:
            raise ParameterError("problem has no constraints")
        return cls(n, kind, tuple(constraints))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "vars": self.vars,
            "constraints": [
                {"weights": list(w), "theta": format_rational(t)} for w, t in self.constraints
            ],
        }


def load_json(source: Union[str, Path, dict]) -> dict:
    if isinstance(source, dict):
        return source
    with open(source) as fh:
        return json.load(fh)


def load_problem(source: Union[str, Path, dict]) -> Problem:
    return Problem.from_dict(load_json(source))


def intersection_of(pairs: Sequence[tuple[Sequence[int], object]]) -> Intersection:
    return Intersection(Ltf(w, t) for w, t in pairs)
