import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from halfspace_prg.errors import ParameterError, UsageError
from halfspace_prg.gf2m import (
    DEFAULT_POLYBITS,
    FieldElement,
    ReductionModulus,
    default_modulus,
    eval_array,
    gf_add,
    gf_inv,
    gf_mul,
    gf_pow,
    is_irreducible,
    mul_array,
    poly_eval,
)

M3 = default_modulus(3)


def fe(v, m=3):
    return FieldElement(v, m)


def test_default_table_covers_every_degree():
    assert sorted(DEFAULT_POLYBITS) == list(range(1, 33))
    for m, poly in DEFAULT_POLYBITS.items():
        assert poly.bit_length() - 1 == m
    assert DEFAULT_POLYBITS[3] == 0b1011
    assert DEFAULT_POLYBITS[8] == 0x11B


@pytest.mark.parametrize("m", range(1, 17))
def test_default_moduli_irreducible_by_trial_division(m):
    assert oracles.ref_irreducible(DEFAULT_POLYBITS[m])


def test_large_default_moduli_irreducible():
    for m in range(17, 33):
        assert is_irreducible(DEFAULT_POLYBITS[m])
        default_modulus(m)


def test_irreducibility_test_agrees_with_trial_division():
    for poly in range(2, 1 << 10):
        assert is_irreducible(poly) == oracles.ref_irreducible(poly), bin(poly)


def test_oracle_table_is_irreducible():
    for poly in oracles.REF_POLYS.values():
        assert oracles.ref_irreducible(poly)


def test_reducible_modulus_rejected():
    with pytest.raises(ParameterError):
        ReductionModulus(3, 0b1111)  # (x + 1)^3
    with pytest.raises(ParameterError):
        ReductionModulus(4, 0b1011)
    with pytest.raises(ParameterError):
        default_modulus(33)


def test_add_examples():
    assert gf_add(fe(0b101), fe(0b011)) == fe(0b110)
    assert gf_add(fe(0b110), fe(0b110)) == fe(0)
    assert gf_add(fe(1, 4), fe(0, 4)) == fe(1, 4)


def test_mul_examples():
    assert gf_mul(fe(0b010), fe(0b010), M3) == fe(0b100)
    assert gf_mul(fe(0b110), fe(0b011), M3) == fe(0b001)
    assert gf_mul(fe(0b101), fe(0), M3) == fe(0)


def test_poly_eval_examples():
    assert poly_eval([fe(1), fe(1)], fe(0b011), M3) == fe(0b010)
    assert poly_eval([fe(0), fe(0), fe(1)], fe(0b110), M3) == fe(0b010)
    for x in range(8):
        assert poly_eval([fe(0b111)], fe(x), M3) == fe(0b111)


def test_usage_errors():
    with pytest.raises(UsageError):
        gf_add(fe(1, 3), fe(1, 4))
    with pytest.raises(UsageError):
        gf_mul(fe(1, 3), fe(1, 3), default_modulus(4))
    with pytest.raises(UsageError):
        poly_eval([], fe(1), M3)
    with pytest.raises(ParameterError):
        FieldElement(8, 3)


@pytest.mark.parametrize("m", range(1, 9))
def test_multiplication_matches_oracle_table(m):
    mod = default_modulus(m)
    if m > 6:
        pairs = [(a, b) for a in range(0, 1 << m, 7) for b in range(1 << m)]
    else:
        pairs = itertools.product(range(1 << m), repeat=2)
    for a, b in pairs:
        assert gf_mul(fe(a, m), fe(b, m), mod).value == oracles.ref_mul(a, b, mod.polybits, m)


@pytest.mark.parametrize("m", range(1, 9))
def test_nonzero_elements_form_cyclic_group(m):
    mod = default_modulus(m)
    order = (1 << m) - 1
    for v in range(1, 1 << m):
        a = fe(v, m)
        assert gf_mul(a, gf_inv(a, mod), mod) == fe(1, m)
        assert gf_pow(a, order, mod) == fe(1, m)
    # a generator exists: some element has multiplicative order 2^m - 1
    def element_order(a):
        x, k = a, 1
        while x != fe(1, m):
            x, k = gf_mul(x, a, mod), k + 1
        return k

    assert max(element_order(fe(v, m)) for v in range(1, 1 << m)) == order


@pytest.mark.parametrize("m", range(1, 5))
def test_distributivity_and_frobenius_exhaustive(m):
    mod = default_modulus(m)
    elems = [fe(v, m) for v in range(1 << m)]
    for a, b, c in itertools.product(elems, repeat=3):
        assert gf_mul(a, gf_add(b, c), mod) == gf_add(gf_mul(a, b, mod), gf_mul(a, c, mod))
    for a, b in itertools.product(elems, repeat=2):
        s = gf_add(a, b)
        assert gf_mul(s, s, mod) == gf_add(gf_mul(a, a, mod), gf_mul(b, b, mod))


def test_zero_has_no_inverse():
    with pytest.raises(ZeroDivisionError):
        gf_inv(fe(0), M3)


elements = st.integers(min_value=1, max_value=32).flatmap(
    lambda m: st.tuples(st.just(m), *[st.integers(0, (1 << m) - 1)] * 3)
)


@given(elements)
def test_field_axioms_random(args):
    m, a, b, c = args
    mod = default_modulus(m)
    A, B, C = fe(a, m), fe(b, m), fe(c, m)
    assert gf_mul(A, B, mod) == gf_mul(B, A, mod)
    assert gf_mul(gf_mul(A, B, mod), C, mod) == gf_mul(A, gf_mul(B, C, mod), mod)
    assert gf_mul(A, gf_add(B, C), mod) == gf_add(gf_mul(A, B, mod), gf_mul(A, C, mod))
    assert A * B == gf_mul(A, B, mod) and A + B == gf_add(A, B)


@given(elements)
def test_array_arithmetic_matches_scalar(args):
    m, a, b, c = args
    mod = default_modulus(m)
    got = mul_array(np.array([a, b, c], dtype=np.uint64), np.array([b, c, a], dtype=np.uint64), mod)
    want = [gf_mul(fe(x, m), fe(y, m), mod).value for x, y in ((a, b), (b, c), (c, a))]
    assert got.tolist() == want
    coeffs = np.array([[a, b, c]], dtype=np.uint64)
    xs = np.arange(min(1 << m, 16), dtype=np.uint64)
    values = eval_array(coeffs, xs, mod)
    for x, v in zip(xs.tolist(), values.tolist()):
        assert v == poly_eval([fe(a, m), fe(b, m), fe(c, m)], fe(x, m), mod).value


@given(st.integers(1, 5), st.lists(st.integers(0, 31), min_size=1, max_size=5), st.integers(0, 31))
def test_poly_eval_matches_power_sum_oracle(m, coeffs, x):
    mask = (1 << m) - 1
    coeffs = [c & mask for c in coeffs]
    x &= mask
    mod = default_modulus(m)
    assert mod.polybits == oracles.REF_POLYS[m]
    got = poly_eval([fe(c, m) for c in coeffs], fe(x, m), mod).value
    assert got == oracles.ref_eval(coeffs, x, mod.polybits, m)
