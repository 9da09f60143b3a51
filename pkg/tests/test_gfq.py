import itertools

import numpy as np
import pytest

from uradec.gfq import (DEFAULT_PRIM_POLY, FieldError, GfContext, gf_rank, poly_mul_mod, row_reduce,
                        symbol_permutation)


def schoolbook(a, b, poly, m):
    # carry-less product as an explicit coefficient list, then long division
    prod = [0] * (2 * m)
    for i in range(m):
        for j in range(m):
            prod[i + j] ^= ((a >> i) & 1) & ((b >> j) & 1)
    for d in range(2 * m - 1, m - 1, -1):
        if prod[d]:
            for k in range(m + 1):
                prod[d - m + k] ^= (poly >> k) & 1
    return sum(bit << i for i, bit in enumerate(prod[:m]))


def test_default_polynomial(gf64):
    assert gf64.prim_poly == 0b1000011
    assert gf64.Q == 64


def test_tables_roundtrip(gf64):
    nz = np.arange(1, 64)
    assert np.array_equal(gf64.antilog_table[gf64.log_table[nz]], nz)
    assert gf64.log_table[0] == -1
    assert sorted(gf64.antilog_table.tolist()) == list(range(1, 64))


def test_add_examples(gf64):
    assert gf64.add(0x2B, 0x15) == 0x3E
    for a in range(64):
        assert gf64.add(a, 0) == a
        assert gf64.add(a, a) == 0


def test_mul_matches_schoolbook_all_pairs(gf64):
    for a in range(64):
        for b in range(64):
            want = schoolbook(a, b, 0b1000011, 6)
            assert gf64.mul(a, b) == want
            assert gf64.mul_table[a, b] == want
            assert poly_mul_mod(a, b, 0b1000011, 6) == want


@pytest.mark.parametrize("m", range(1, 9))
def test_all_default_polys_primitive(m):
    ctx = GfContext(m)
    assert ctx.prim_poly == DEFAULT_PRIM_POLY[m]
    a, b = (3 % ctx.Q) or 1, ctx.Q - 1
    assert ctx.mul(a, b) == schoolbook(a, b, ctx.prim_poly, m)


def test_field_axioms_exhaustive(gf64):
    M = gf64.mul_table
    a = np.arange(64)
    A, B, C = np.meshgrid(a, a, a, indexing="ij")
    assert np.array_equal((A ^ B) ^ C, A ^ (B ^ C))
    assert np.array_equal(A ^ B, B ^ A)
    assert np.array_equal(M[M[A, B], C], M[A, M[B, C]])
    assert np.array_equal(M[A, B], M[B, A])
    assert np.array_equal(M[A, B ^ C], M[A, B] ^ M[A, C])


def test_inverse(gf64):
    assert gf64.inv(1) == 1
    for a in range(1, 64):
        assert gf64.mul(a, gf64.inv(a)) == 1
    with pytest.raises(FieldError):
        gf64.inv(0)


def test_out_of_range(gf64):
    with pytest.raises(FieldError):
        gf64.mul(64, 1)
    with pytest.raises(FieldError):
        gf64.add(-1, 0)


def test_bad_contexts():
    with pytest.raises(FieldError):
        GfContext(9)
    with pytest.raises(FieldError):
        GfContext(4, 0b11111)  # irreducible but not primitive
    with pytest.raises(FieldError):
        GfContext(4, 0b111)


def test_permutation_identity_and_zero(gf64):
    p = symbol_permutation(gf64, 1)
    assert np.array_equal(p.perm, np.arange(64))
    with pytest.raises(FieldError):
        symbol_permutation(gf64, 0)


def test_permutation_is_bijection_fixing_zero(gf64):
    for alpha in range(1, 64):
        p = gf64.permutation(alpha)
        assert p.perm[0] == 0
        assert sorted(p.perm.tolist()) == list(range(64))


def test_permutation_composition_all_pairs(gf64):
    perms = [None] + [symbol_permutation(gf64, a) for a in range(1, 64)]
    for a, b in itertools.product(range(1, 64), repeat=2):
        assert np.array_equal(perms[a] @ perms[b], perms[gf64.mul(a, b)].perm)


def test_permutation_inverse(gf64):
    for a in range(1, 64):
        p = symbol_permutation(gf64, a)
        q = symbol_permutation(gf64, gf64.inv(a))
        assert np.array_equal(p @ q, np.arange(64))
        assert np.array_equal(p.inverse, q.perm)


def test_row_reduce(gf64, rng):
    M = rng.integers(0, 64, size=(5, 9))
    R, piv = row_reduce(gf64, M)
    assert gf_rank(gf64, M) == len(piv) == 5
    assert np.array_equal(R[:, piv], np.eye(5, dtype=np.int64))
    # duplicate rows lose rank
    M2 = np.vstack([M[:3], M[:1]])
    assert gf_rank(gf64, M2) == 3
