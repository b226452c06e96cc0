"""Pseudorandom generator for intersections of sparse-or-regular halfspaces,
with deterministic approximate counting and an empirical verification harness."""

from .errors import (
    CapExceededError,
    ClassificationError,
    HalfspacePrgError,
    InfeasibleError,
    ParameterError,
    UsageError,
)
from .eval_count import (
    approx_count,
    exact_gen_expectation,
    exact_uniform_expectation,
    fooling_error,
    ip_to_intersection,
    mc_gen_expectation,
)
from .kwise import KWiseSeed, make_bitgen, make_hash_family, verify_independence
from .ltf import CnfFormula, Intersection, Ltf, classify_dichotomy, decompose, sparse_to_cnf
from .prggen import GenParams, GenSeed, generate, make_params, plan_params, seed_length

__version__ = "0.1.0"
