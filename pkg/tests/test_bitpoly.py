import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from ese import _kernels as K
from ese.bitpoly import (
    BitPolynomial,
    add,
    mul_base,
    poly_from_bytes,
    poly_to_bytes,
    product_capacity,
    shift_left,
)
from ese.errors import LengthError


def poly(value: int, bits: int | None = None) -> BitPolynomial:
    return BitPolynomial.from_int(value, bits)


@st.composite
def sized_ints(draw, max_bits=3000):
    bits = draw(st.integers(1, max_bits))
    return draw(st.integers(0, (1 << bits) - 1)), bits


# -- representation ---------------------------------------------------------


def test_degree_and_zero():
    assert BitPolynomial.zero(100).degree is None
    assert BitPolynomial.zero(0).is_zero()
    assert poly(1).degree == 0
    assert poly(1 << 200, 300).degree == 200
    assert not BitPolynomial.zero(5)


def test_equality_ignores_capacity():
    assert poly(0b1011, 4) == poly(0b1011, 700)
    assert hash(poly(0b1011, 4)) == hash(poly(0b1011, 700))
    assert poly(0, 3) == BitPolynomial.zero(90)
    assert poly(3) != poly(1)


def test_from_int_rejects_overflow():
    with pytest.raises(LengthError):
        poly(0b1000, 3)
    with pytest.raises(ValueError):
        poly(-1)


def test_constructor_validates_words():
    with pytest.raises(ValueError):
        BitPolynomial(np.array([0b1000], np.uint64), 3)
    with pytest.raises(ValueError):
        BitPolynomial(np.zeros(3, np.uint64) + 1, 64)
    p = BitPolynomial(np.array([5, 0, 0], np.uint64), 64)  # zero tail words are dropped
    assert p.to_int() == 5 and p.words.size == 1


def test_words_are_read_only():
    p = poly(12345, 100)
    with pytest.raises(ValueError):
        p.words[0] = 1


def test_exponents_coefficient_truncate_resize():
    p = BitPolynomial.from_exponents([130, 64, 3, 0])
    assert p.exponents() == [130, 64, 3, 0]
    assert p.coefficient(64) == 1 and p.coefficient(65) == 0 and p.coefficient(10**6) == 0
    assert p.truncate(65).exponents() == [64, 3, 0]
    assert p.truncate(65).bit_len == 65
    assert p.resized(1000).exponents() == p.exponents()
    with pytest.raises(LengthError):
        p.resized(100)
    assert "x^3" in repr(BitPolynomial.from_exponents([3, 1, 0]))


@given(sized_ints())
def test_bytes_roundtrip(vb):
    v, bits = vb
    p = poly(v, bits)
    raw = poly_to_bytes(p)
    assert raw == O.bits_to_bytes_lsb(v, bits)
    assert poly_from_bytes(raw, bits) == p


def test_from_bytes_masks_tail_bits():
    p = poly_from_bytes(b"\xff\xff", 12)
    assert p.to_int() == 0xFFF and p.bit_len == 12
    with pytest.raises(LengthError):
        poly_from_bytes(b"\x00", 9)


# -- arithmetic -------------------------------------------------------------


@given(sized_ints(), sized_ints())
def test_add_is_xor(a, b):
    (x, xb), (y, yb) = a, b
    s = add(poly(x, xb), poly(y, yb))
    assert s.to_int() == x ^ y and s.bit_len == max(xb, yb)
    assert (poly(x, xb) ^ poly(y, yb)) == s


@given(sized_ints(), st.integers(0, 500))
def test_shift_left(a, s):
    x, xb = a
    r = shift_left(poly(x, xb), s)
    assert r.to_int() == x << s and r.bit_len == xb + s
    with pytest.raises(ValueError):
        shift_left(poly(x, xb), -1)


def test_known_products():
    a, b, prod = O.KA_SMALL
    assert mul_base(poly(a), poly(b)).to_int() == prod
    sq, want = O.KA_SQUARE
    assert mul_base(poly(sq), poly(sq)).to_int() == want


def test_product_capacity_and_zero():
    assert product_capacity(10, 7) == 16
    assert product_capacity(0, 7) == 0
    z = mul_base(BitPolynomial.zero(50), poly(7))
    assert z.is_zero() and z.bit_len == 52


@given(sized_ints(4000), sized_ints(4000))
def test_mul_base_matches_oracle(a, b):
    (x, xb), (y, yb) = a, b
    r = mul_base(poly(x, xb), poly(y, yb))
    assert r.to_int() == O.clmul(x, y)
    assert r.bit_len == xb + yb - 1


@pytest.mark.parametrize("hw", [False, True])
@pytest.mark.parametrize("threshold", [1, 2, 8, 48])
def test_mul_base_paths_agree(hw, threshold):
    if hw and not K.HAS_PCLMUL:
        pytest.skip("no carryless-multiply instruction on this CPU")
    rng = np.random.default_rng(threshold)
    for bits in (1, 63, 64, 65, 500, 64 * 97 + 5, 20_000):
        x, y = (int.from_bytes(rng.bytes((bits + 7) // 8), "little") & ((1 << bits) - 1)
                for _ in range(2))
        got = mul_base(poly(x, bits), poly(y, bits), hw=hw, threshold=threshold).to_int()
        assert got == O.clmul(x, y)


def test_word_products_agree():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = (int(v) for v in rng.integers(0, 1 << 63, 2, dtype=np.uint64) * 2 + 1)
        lo, hi = K.clmul64_sw(np.uint64(a), np.uint64(b))
        assert (int(hi) << 64 | int(lo)) == O.clmul(a, b)
        if K.HAS_PCLMUL:
            assert K.clmul64_hw(np.uint64(a), np.uint64(b)) == (lo, hi)


def test_unbalanced_operands_are_exact():
    rng = np.random.default_rng(1)
    x = int.from_bytes(rng.bytes(40_000), "little")
    y = int.from_bytes(rng.bytes(3), "little") | 1
    assert mul_base(poly(x, 320_000), poly(y, 24)).to_int() == O.clmul(x, y)
