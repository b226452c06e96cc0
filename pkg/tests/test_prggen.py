import json
import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from halfspace_prg import bits
from halfspace_prg.errors import CapExceededError, InfeasibleError, ParameterError, UsageError
from halfspace_prg.kwise import KWiseSeed, bitgen_output, hash_eval
from halfspace_prg.prggen import (
    BitReader,
    GenParams,
    GenSeed,
    choose_delta_cnf,
    enumerate_seeds,
    generate,
    generate_words,
    make_params,
    plan_from_weight,
    plan_from_weight_report,
    plan_params,
    seed_length,
    solve_tau,
    theoretical_error_bound,
)


def test_worked_plan():
    p = plan_params(1024, 16, 4, 1 / 8, delta_cnf=2.0 ** -20)
    assert (p.ell, p.r_hash, p.r_bucket, p.m_hash, p.m_bucket) == (8, 8, 800, 10, 10)
    assert p.seed_len_bits == seed_length(p) == 64080


def test_plan_clamps_and_overrides():
    p = plan_params(16, 1, 3, 0.5)
    assert p.r_hash == 2 and p.ell == 2
    p = plan_params(16, 3, 2, 0.2, r_bucket=8, ell=4, r_hash=4)
    assert (p.r_bucket, p.ell, p.r_hash) == (8, 4, 4)
    assert plan_params(16, 2, 2, 0.3).ell == 4
    assert plan_params(1024, 16, 4, 1 / 8, delta_cnf=2.0 ** -20, c_br=2).r_bucket == 16 + 2 * 784


@pytest.mark.parametrize("tau", [0, 1, -0.5, 2])
def test_plan_rejects_tau(tau):
    with pytest.raises(ParameterError):
        plan_params(16, 2, 2, tau)


def test_default_delta_cnf_rule():
    n, k, tau, target = 64, 4, 0.25, 0.5
    d = choose_delta_cnf(n, k, tau, target)
    assert math.log2(d).is_integer() and d <= 0.5
    bound = lambda delta: theoretical_error_bound(make_params(n, 4, 2, 2, delta), k, tau)["terms"]
    cnf = lambda delta: {key: v for key, v in bound(delta).items() if key.startswith("cnf")}
    assert all(v <= target for v in cnf(d).values())
    if d < 0.5:
        assert any(v > target for v in cnf(2 * d).values())
    assert plan_params(n, k, 2, tau, target).delta_cnf == d


def test_seed_length_examples():
    p = make_params(8, 2, 2, 2)
    assert (p.m_hash, p.m_bucket) == (3, 3) and seed_length(p) == 18
    q = make_params(8, 4, 2, 2)
    assert seed_length(q) - q.hash_bits == 2 * (seed_length(p) - p.hash_bits)


def test_params_validation_and_json():
    p = make_params(20, 4, 3, 5, 2.0 ** -10)
    again = GenParams.from_dict(json.loads(p.to_json()))
    assert again == p and again.to_json() == p.to_json()
    with pytest.raises(ParameterError):
        GenParams(8, 2, 2, 2, 3, 3, None, 19)
    with pytest.raises(ParameterError):
        GenParams(8, 3, 2, 2, 3, 3)
    with pytest.raises(ParameterError):
        GenParams(8, 2, 2, 2, 4, 3)
    with pytest.raises(ParameterError):
        GenParams.from_dict({"n": 8})


def test_generate_examples():
    p = make_params(8, 2, 2, 2)
    for hash_value in range(64):
        seed = GenSeed.from_int(p, hash_value)
        assert generate(p, seed) == [1] * 8
    # zero hash sends everything to bucket 1
    for bucket1 in range(64):
        seed = GenSeed.from_int(p, bucket1 << 6)
        assert generate(p, seed) == bitgen_output(p.bucket_spec, seed.bucket_seeds[0])


def test_generate_depends_only_on_selected_bucket():
    rng = random.Random(3)
    for _ in range(200):
        p = make_params(rng.randint(2, 16), rng.choice([2, 4]), 2, rng.randint(1, 4))
        seed = GenSeed.from_int(p, rng.getrandbits(p.seed_len_bits))
        Y = generate(p, seed)
        buckets = [hash_eval(p.hash_spec, seed.hash_seed, i) for i in range(1, p.n + 1)]
        for b in range(1, p.ell + 1):
            other = list(seed.bucket_seeds)
            other[b - 1] = KWiseSeed.from_int(rng.getrandbits(p.bucket_bits), p.r_bucket, p.m_bucket)
            Z = generate(p, GenSeed(seed.hash_seed, tuple(other)))
            for i in range(p.n):
                if buckets[i] != b:
                    assert Z[i] == Y[i]


def test_full_independence_hits_cube_uniformly():
    for n in range(1, 5):
        p = make_params(n, 2, 1, n)
        Y = generate_words(p, bits.counter_words(0, 1 << p.seed_len_bits))
        counts = Counter(map(tuple, Y.tolist()))
        assert len(counts) == 2 ** n and len(set(counts.values())) == 1


def test_bit_reader_consumes_exactly_the_layout():
    p = make_params(10, 4, 3, 2)
    reader = BitReader((1 << p.seed_len_bits) - 1, p.seed_len_bits)
    GenSeed.read(p, reader)
    assert reader.consumed == p.seed_len_bits
    with pytest.raises(UsageError):
        reader.read(1)


def test_seed_serialization():
    p = make_params(8, 2, 2, 2)
    seed = GenSeed.from_int(p, 0b101)
    assert seed.hash_seed.values == (0b101, 0)
    assert seed.to_hex(p) == "050000"
    assert GenSeed.from_hex(p, "050000") == seed
    with pytest.raises(UsageError):
        GenSeed.from_hex(p, "05")
    with pytest.raises(UsageError):
        GenSeed.from_int(p, 1 << 18)


def test_enumerate_seeds():
    p = make_params(8, 2, 2, 2)
    seeds = list(enumerate_seeds(p))
    assert len(seeds) == 262144
    assert seeds[0].to_int() == 0 and seeds[0] == GenSeed.from_int(p, 0)
    assert len({s.to_int() for s in seeds}) == len(seeds)
    with pytest.raises(CapExceededError):
        next(enumerate_seeds(make_params(16, 4, 4, 4)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.sampled_from([1, 2, 4]), st.integers(1, 3), st.integers(1, 3), st.data())
def test_generate_matches_oracle_and_bulk(n, ell, r_hash, r_bucket, data):
    p = make_params(n, ell, r_hash, r_bucket)
    value = data.draw(st.integers(0, (1 << p.seed_len_bits) - 1))
    seed = GenSeed.from_int(p, value)
    assert seed.to_int() == value
    Y = generate(p, seed)
    assert tuple(Y) == oracles.ref_gen(n, ell, r_hash, r_bucket, value)
    words = np.array([[(value >> (64 * j)) & ((1 << 64) - 1) for j in range(-(-p.seed_len_bits // 64))]],
                     dtype=np.uint64)
    assert generate_words(p, words)[0].tolist() == Y


def test_bulk_generation_matches_scalar_on_counter_words():
    p = make_params(8, 2, 2, 2)
    Y = generate_words(p, bits.counter_words(1000, 500))
    for row, value in zip(Y, range(1000, 1500)):
        assert row.tolist() == generate(p, GenSeed.from_int(p, value))


# -- planning helpers --------------------------------------------------------

def _bound(L, tau):
    return L ** 1.6 * (tau * math.log(1 / tau)) ** 0.2


def test_solve_tau_matches_grid_scan():
    k, delta = 4, 0.5
    L = math.log2(k + 2)
    step = 2.0 ** -20
    grid = np.arange(1, int(math.exp(-1) / step)) * step
    feasible = grid[L ** 1.6 * (grid * np.log(1 / grid)) ** 0.2 <= delta]
    tau = solve_tau(k, delta)
    assert abs(tau - feasible.max()) <= step
    assert _bound(L, tau) <= delta * (1 + 1e-9)


def test_solve_tau_monotone_and_weight_plan():
    previous = None
    for delta in (0.9, 0.45, 0.225):
        report = plan_from_weight_report(64, 2, 1, delta)
        assert report["s"] >= (1 / report["tau"]) ** 2
        if previous:
            assert report["tau"] < previous["tau"] and report["s"] > previous["s"]
        previous = report
    assert plan_from_weight(64, 2, 1, 0.225) == previous["params"]
    with pytest.raises(InfeasibleError):
        solve_tau(2, 1e-6)
    with pytest.raises(ParameterError):
        solve_tau(2, 1.5)


def test_error_bound_terms():
    p = make_params(64, 16, 2, 2)
    report = theoretical_error_bound(p, 2, 1 / 16)
    assert report["label"] == "HEURISTIC"
    # independent recomputation of the closed form
    L = math.log2(4)
    T = (1 / 16) * math.log(16)
    lam = L ** 1.1 * T ** 0.2
    expected = (L ** 6 / lam ** 4) * T + lam * math.sqrt(L) + L ** 1.6 * T ** 0.2
    assert report["delta_estimate"] == pytest.approx(expected, rel=1e-12)
    assert report["lambda"] == pytest.approx(lam, rel=1e-12)
    terms = report["terms"]
    assert terms["strip"] == pytest.approx(terms["hybrid_regular"], rel=1e-12)


def test_error_bound_vanishes_monotonically():
    p = make_params(64, 2, 2, 2)
    values = [theoretical_error_bound(p, 4, 2.0 ** -e)["delta_estimate"] for e in range(2, 60, 4)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-2


def test_error_bound_includes_cnf_terms_when_known():
    p = make_params(64, 2, 2, 2, 2.0 ** -30)
    terms = theoretical_error_bound(p, 4, 0.25)["terms"]
    assert {"cnf_moment", "cnf_coupling", "cnf_derivative_1", "cnf_derivative_3"} <= set(terms)
    with pytest.raises(ParameterError):
        theoretical_error_bound(p, 4, 1.0)
