import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from ese import modred as M
from ese.bench import random_poly
from ese.bitpoly import BitPolynomial
from ese.errors import ModulusSearchError, ParameterError
from ese.modred import (
    ModulusCache,
    SparseIrreducible,
    field_modulus,
    find_irreducible,
    is_irreducible,
    modulus_at_least,
    reduce,
    reduce_parallel,
)

# Sparsest moduli of some degrees in search order (smallest trinomial middle
# exponent, else lexicographically smallest pentanomial), pinned.
KNOWN = {
    2: (2, 1, 0), 3: (3, 1, 0), 8: (8, 4, 3, 1, 0), 63: (63, 1, 0), 64: (64, 4, 3, 1, 0),
    127: (127, 1, 0), 128: (128, 7, 2, 1, 0), 233: (233, 74, 0), 1024: (1024, 19, 6, 1, 0),
}


# -- modulus objects --------------------------------------------------------


def test_sparse_irreducible_validation():
    f = SparseIrreducible((8, 4, 3, 1, 0))
    assert f.degree == 8 and f.weight == 5
    assert list(f.shifts) == [4, 5, 7, 8]
    assert f.to_int() == 0x11B
    assert f.to_poly().to_int() == 0x11B
    assert str(f) == "x^8 + x^4 + x^3 + x + 1"
    for bad in [(8, 4, 3, 1), (8, 4, 2, 0), (3, 3, 0), (0,), (4, 1, 2, 0, 3)]:
        with pytest.raises(ParameterError):
            SparseIrreducible(bad)


# -- irreducibility ---------------------------------------------------------


def test_is_irreducible_accepts_several_forms():
    assert is_irreducible(SparseIrreducible((8, 4, 3, 1, 0)))
    assert is_irreducible(0x11B)
    assert is_irreducible(BitPolynomial.from_int(0x11B))
    assert is_irreducible([0, 1, 3, 4, 8])
    assert not is_irreducible([8, 0])  # (x + 1)^8
    assert not is_irreducible(0b110)  # divisible by x
    assert is_irreducible(0b10) and is_irreducible(0b11)
    with pytest.raises(ParameterError):
        is_irreducible(1)


def test_small_degree_verdicts_match_trial_division():
    for n in range(1, 10):
        for g in O.all_polys(n):
            assert is_irreducible(g) == O.is_irreducible_trial(g), bin(g)


@pytest.mark.parametrize("n,exps", sorted(KNOWN.items()))
def test_find_irreducible_known_values(n, exps):
    f = find_irreducible(n)
    assert f.exponents == exps
    assert O.rabin_irreducible(exps)


def test_find_irreducible_is_sparsest_first():
    for n in range(2, 200):
        f = find_irreducible(n)
        if f.weight == 5:
            # no trinomial exists of this degree
            assert not any(O.rabin_irreducible((n, a, 0)) for a in range(1, n))
        else:
            assert not any(O.rabin_irreducible((n, a, 0)) for a in range(1, f.exponents[1]))


def test_find_irreducible_errors():
    with pytest.raises(ParameterError):
        find_irreducible(1)
    M._memo.pop(1031, None)
    with pytest.raises(ModulusSearchError):
        find_irreducible(1031, max_candidates=1)


def test_rabin_rejects_composites():
    # products of two irreducibles are never reported irreducible
    rng = random.Random(1)
    for _ in range(30):
        a = find_irreducible(rng.randint(2, 40)).to_int()
        b = find_irreducible(rng.randint(2, 40)).to_int()
        assert not is_irreducible(O.clmul(a, b))


@pytest.mark.parametrize("m", sorted(M._BASES))
def test_primitive_base_table_regenerates(m):
    assert M._primitive_base(m) == M._BASES[m]


def test_lifted_rule_agrees_with_rabin():
    for m in (2, 3, 4, 5, 6, 7):
        base = M._BASES[m]
        for t in range(1, 40):
            exps = tuple(e * t for e in base)
            if t > 1:
                assert M._lifted_irreducible(exps, t) == O.rabin_irreducible(exps), (m, t)


@pytest.mark.parametrize("n", [4097, 5000, 10_000, 100_000, 1 << 20, 1 << 28, 2 * 10**9])
def test_modulus_at_least(n):
    f = modulus_at_least(n)
    assert f.degree >= n
    assert f.degree <= 1.05 * n + 64
    assert f.weight in (3, 5)
    assert is_irreducible(f)
    if f.degree <= 12_000:
        assert O.rabin_irreducible(f.exponents)


def test_field_modulus_exact_below_limit_and_lifted_above():
    assert field_modulus(100).degree == 100
    assert field_modulus(5000).degree >= 5000
    assert field_modulus(5000, search_limit=10) == modulus_at_least(5000)
    with pytest.raises(ParameterError):
        field_modulus(1)


# -- reduction --------------------------------------------------------------


@st.composite
def reduction_cases(draw):
    n = draw(st.integers(2, 300))
    f = find_irreducible(n)
    rb = draw(st.integers(1, 5000))
    r = draw(st.integers(0, (1 << rb) - 1))
    return r, rb, f


@given(reduction_cases())
def test_reduce_matches_long_division(case):
    r, rb, f = case
    got = reduce(BitPolynomial.from_int(r, rb), f)
    fi = f.to_int()
    assert got.to_int() == O.polymod(r, fi)
    assert got.bit_len == f.degree
    q, rem = O.polydivmod(r, fi)
    assert O.clmul(q, fi) ^ rem == r


def test_reduce_known_answer():
    x8, f, want = O.KA_AES
    assert reduce(BitPolynomial.from_int(x8), SparseIrreducible((8, 4, 3, 1, 0))).to_int() == want


def test_reduce_accepts_plain_exponents_and_small_inputs():
    f = (8, 4, 3, 1, 0)
    assert reduce(BitPolynomial.from_int(0b101), f).to_int() == 0b101
    assert reduce(BitPolynomial.zero(0), f).is_zero()
    with pytest.raises(ParameterError):
        reduce(BitPolynomial.from_int(5), (8, 4, 0, 1))


def test_reduce_lifted_modulus_against_oracle():
    rng = np.random.default_rng(2)
    f = modulus_at_least(70_000)
    r = random_poly(f.degree + 5000, rng)
    assert reduce(r, f).to_int() == O.sparse_mod(r.to_int(), f.exponents)


@pytest.mark.parametrize("n", [1 << 16, 100_000, 1 << 20])
def test_reduce_parallel_is_deterministic(n):
    rng = np.random.default_rng(n)
    f = modulus_at_least(n)
    r = random_poly(2 * f.degree - 1, rng)
    want = reduce(r, f)
    assert want.to_int() == O.sparse_mod(r.to_int(), f.exponents)
    for w in (1, 2, 3, 4, 8):
        assert reduce_parallel(r, f, w) == want
    with pytest.raises(ParameterError):
        reduce_parallel(r, f, 0)


# -- cache ------------------------------------------------------------------


def test_cache_roundtrip(tmp_path):
    path = tmp_path / "sub" / "moduli.txt"
    c = ModulusCache(path)
    assert c.get(8) is None
    c.put(SparseIrreducible((8, 4, 3, 1, 0)))
    c.put(SparseIrreducible((3, 1, 0)))
    assert path.read_text() == "3:3,1,0\n8:8,4,3,1,0\n"
    fresh = ModulusCache(path)
    assert fresh.get(8).exponents == (8, 4, 3, 1, 0)
    assert set(fresh.entries()) == {3, 8}


def test_cache_ignores_bad_lines(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("# comment\n5:5,2,0\nbogus\n7:6,1,0\n9:9,4,0,1\n")
    assert set(ModulusCache(path).entries()) == {5}


def test_cache_used_by_search(tmp_path):
    c = ModulusCache(tmp_path / "m.txt")
    M._memo.pop(777, None)
    f = find_irreducible(777, cache=c)
    assert c.get(777) == f
    M._memo.pop(777, None)
    assert find_irreducible(777, cache=ModulusCache(tmp_path / "m.txt")) == f


def test_default_cache_path_env(monkeypatch, tmp_path):
    monkeypatch.setenv("ESE_MODULUS_CACHE", str(tmp_path / "x.txt"))
    assert M.default_cache_path() == tmp_path / "x.txt"
    monkeypatch.delenv("ESE_MODULUS_CACHE")
    monkeypatch.setenv("XDG_CACHE_HOME", str(tmp_path))
    assert M.default_cache_path() == tmp_path / "ese" / "moduli.txt"


def test_reduce_identities():
    f = SparseIrreducible((2, 1, 0))
    assert reduce(BitPolynomial.from_int(0b100), f).to_int() == 0b11  # x^2 = x + 1
    g = find_irreducible(300)
    assert reduce(g.to_poly(), g).is_zero()
    low = BitPolynomial.from_int(12345, 299)
    assert reduce(low, g).to_int() == 12345


@given(st.integers(0, (1 << 3000) - 1), st.integers(0, (1 << 3000) - 1))
def test_reduce_is_linear(a, b):
    f = find_irreducible(257)
    A, B = BitPolynomial.from_int(a, 3000), BitPolynomial.from_int(b, 3000)
    assert reduce(A ^ B, f) == reduce(A, f) ^ reduce(B, f)


def test_search_is_idempotent():
    assert find_irreducible(500) is find_irreducible(500)
