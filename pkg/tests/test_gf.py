import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compc.errors import DimensionMismatch, DivisionByZero, IndivisibleSplit
from compc.gf import (DEFAULT_PRIME, FMatrix, fe_inv, fe_mul, fe_pow,
                      hconcat, mat_mul, nullspace_raw, rref,
                      solve_nullspace, solve_particular, vconcat)


def brute_nullspace(a, p):
    """Oracle: enumerate all vectors for tiny p and dimension."""
    a = np.asarray(a) % p
    n = a.shape[1]
    out = []
    for idx in range(p ** n):
        v = []
        k = idx
        for _ in range(n):
            v.append(k % p)
            k //= p
        v = np.array(v)
        if not (a @ v % p).any():
            out.append(tuple(v))
    return set(out)


def span(basis, p):
    basis = [np.array(b) for b in basis]
    n = basis[0].shape[0] if basis else 0
    vecs = {tuple([0] * n)}
    for _ in range(len(basis)):
        new = set()
        for v in vecs:
            for b in basis:
                for c in range(p):
                    new.add(tuple((np.array(v) + c * b) % p))
        vecs |= new
    return vecs


def test_scalar_examples():
    assert fe_mul(3, 5, 7) == 1
    assert fe_inv(3, 7) == 5
    assert fe_pow(3, 6, 7) == 1


def test_inv_zero_raises():
    with pytest.raises(DivisionByZero):
        fe_inv(0, 7)
    with pytest.raises(DivisionByZero):
        fe_inv(14, 7)


@given(st.integers(1, DEFAULT_PRIME - 1))
@settings(max_examples=20, deadline=None)
def test_inv_roundtrip_default_prime(a):
    assert fe_mul(a, fe_inv(a, DEFAULT_PRIME), DEFAULT_PRIME) == 1


def test_nullspace_example():
    m = FMatrix([[1, 1, 1], [1, 2, 3]], 7)
    basis = solve_nullspace(m)
    assert basis.shape == (1, 3)
    # proportional to (1, 5, 1)
    v = basis.a[0]
    assert tuple(v * fe_inv(int(v[0]), 7) % 7) == (1, 5, 1)


def test_nullspace_identity_empty():
    m = FMatrix(np.eye(3, dtype=np.int64), 7)
    assert solve_nullspace(m).shape == (0, 3)


def test_nullspace_zero_matrix_full_rank():
    m = FMatrix.zeros(2, 3, 7)
    basis = solve_nullspace(m)
    assert basis.shape == (3, 3)
    assert span(basis.a, 7) == brute_nullspace(m.a, 7)


@given(st.integers(0, 3 ** 6 - 1))
@settings(max_examples=12, deadline=None)
def test_nullspace_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 3, size=(2, 3))
    basis = nullspace_raw(a, 3)
    assert span(basis, 3) == brute_nullspace(a, 3)
    for row in basis:
        assert not (np.asarray(a) @ row % 3).any()


def test_matmul_matches_python_bigints():
    p = DEFAULT_PRIME
    rng = np.random.default_rng(0)
    a = rng.integers(0, p, size=(5, 7), dtype=np.int64)
    b = rng.integers(0, p, size=(7, 4), dtype=np.int64)
    got = mat_mul(a, b, p)
    want = np.array([[sum(int(a[i, k]) * int(b[k, j]) for k in range(7)) % p
                      for j in range(4)] for i in range(5)])
    assert np.array_equal(got, want)


def test_fmatrix_ops():
    a = FMatrix([[1, 2], [3, 4]], 7)
    b = FMatrix([[5, 6], [0, 1]], 7)
    assert (a + b).to_lists() == [[6, 1], [3, 5]]
    assert (a - b).to_lists() == [[3, 3], [3, 3]]
    assert (a @ b).to_lists() == [[5, 1], [1, 1]]
    assert a.T.to_lists() == [[1, 3], [2, 4]]
    assert a.scalar_mul(3).to_lists() == [[3, 6], [2, 5]]
    assert (-a).to_lists() == [[6, 5], [4, 3]]


def test_fmatrix_shape_errors():
    a = FMatrix([[1, 2]], 7)
    b = FMatrix([[1], [2]], 7)
    with pytest.raises(DimensionMismatch):
        a + b
    with pytest.raises(DimensionMismatch):
        b @ b
    with pytest.raises(DimensionMismatch):
        FMatrix(np.zeros((65, 1)), 7)


def test_block_split_and_concat():
    a = FMatrix([[1, 2, 3, 4], [5, 6, 7, 8]], 11)
    left, right = a.block_split(2)
    assert left.to_lists() == [[1, 2], [5, 6]]
    assert right.to_lists() == [[3, 4], [7, 8]]
    assert hconcat([left, right]) == a
    top, bottom = a.block_split(2, axis=0)
    assert vconcat([top, bottom]) == a
    with pytest.raises(IndivisibleSplit):
        a.block_split(3)


def test_solve_particular():
    p = 7
    a = [[1, 1, 1], [1, 2, 3]]
    b = [4, 2]
    x = solve_particular(a, b, p)
    assert x is not None
    assert np.array_equal(np.array(a) @ x % p, np.array(b))
    # inconsistent system
    bad = solve_particular([[1, 1], [2, 2]], [1, 3], p)
    assert bad is None


def test_rref_idempotent():
    r1, piv1 = rref([[2, 4, 1], [1, 2, 3]], 7)
    r2, piv2 = rref(r1, 7)
    assert np.array_equal(r1, r2) and piv1 == piv2
