import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PAULI_X, PAULI_Y, PAULI_Z, random_hermitian, random_matrix
from optomo.errors import DimensionError, ValidationError
from optomo.opalg import (bell_vectors, haar_unitaries, haar_unitary, hs_inner, is_hermitian, is_psd,
                          is_unitary, ketbra, make_rng, partial_trace, partial_transpose, permute_legs,
                          pseudo_inverse, psd_sqrt, substream, transpose_theta, unvectorize, vectorize,
                          weyl_basis, weyl_unitary)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 4)


def test_vectorize_identity_is_row_major():
    np.testing.assert_array_equal(vectorize(np.eye(2)), [1, 0, 0, 1])
    A = np.arange(6).reshape(2, 3)
    np.testing.assert_array_equal(vectorize(A), np.arange(6))


def test_unvectorize_round_trip_and_errors(rng):
    A = random_matrix(rng, 3)
    np.testing.assert_allclose(unvectorize(vectorize(A), 3), A)
    B = random_matrix(rng, 2, 5)
    np.testing.assert_allclose(unvectorize(vectorize(B), 2, 5), B)
    with pytest.raises(DimensionError):
        unvectorize(np.ones(7), 3)


def test_pauli_inner_products_vanish():
    assert abs(hs_inner(PAULI_X, PAULI_Z)) == 0
    assert abs(hs_inner(PAULI_X, PAULI_X) - 2) < 1e-15


@settings(max_examples=40, deadline=None)
@given(seeds, dims, dims)
def test_inner_product_is_trace(seed, r, c):
    rng = make_rng(seed)
    A, B = random_matrix(rng, r, c), random_matrix(rng, r, c)
    assert abs(np.vdot(vectorize(A), vectorize(B)) - np.trace(A.conj().T @ B)) < 1e-12 * (1 + np.abs(A).sum() * np.abs(B).sum())


@settings(max_examples=40, deadline=None)
@given(seeds, dims, dims, dims, dims)
def test_kron_acts_as_sandwich(seed, m, n, p, q):
    rng = make_rng(seed)
    X, Y, A = random_matrix(rng, m, p), random_matrix(rng, n, q), random_matrix(rng, p, q)
    lhs = np.kron(X, Y) @ vectorize(A)
    rhs = vectorize(X @ A @ Y.T)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


@settings(max_examples=40, deadline=None)
@given(seeds, dims, dims)
def test_partial_traces_of_dyads(seed, r, c):
    rng = make_rng(seed)
    A, B = random_matrix(rng, r, c), random_matrix(rng, r, c)
    dy = ketbra(vectorize(A), vectorize(B))
    np.testing.assert_allclose(partial_trace(dy, (r, c), [1]), A @ B.conj().T, atol=1e-11)
    np.testing.assert_allclose(partial_trace(dy, (r, c), [0]), (B.conj().T @ A).T, atol=1e-11)


def test_partial_trace_examples(rng):
    I = vectorize(np.eye(2))
    np.testing.assert_allclose(partial_trace(np.outer(I, I), (2, 2), [1]), np.eye(2))
    rho, sig = random_hermitian(rng, 2), random_hermitian(rng, 3)
    np.testing.assert_allclose(partial_trace(np.kron(rho, sig), (2, 3), [1]), rho * np.trace(sig))
    # three legs, middle traced keeps the outer order
    a, b, c = random_hermitian(rng, 2), random_hermitian(rng, 3), random_hermitian(rng, 2)
    np.testing.assert_allclose(partial_trace(np.kron(np.kron(a, b), c), (2, 3, 2), [1]),
                               np.kron(a, c) * np.trace(b), atol=1e-10)
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), (2, 3), [0])
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), (2, 2), [2])


def test_permute_and_partial_transpose(rng):
    a, b = random_matrix(rng, 2), random_matrix(rng, 3)
    np.testing.assert_allclose(permute_legs(np.kron(a, b), (2, 3), (1, 0)), np.kron(b, a))
    np.testing.assert_allclose(partial_transpose(np.kron(a, b), (2, 3), [1]), np.kron(a, b.T))


def test_transpose_theta():
    np.testing.assert_array_equal(transpose_theta(PAULI_Y), -PAULI_Y)
    D = np.diag([2.0, 5.0])
    np.testing.assert_array_equal(transpose_theta(D), D)
    A = np.arange(6).reshape(2, 3) * (1 + 1j)
    np.testing.assert_array_equal(transpose_theta(transpose_theta(A)), A)


def test_weyl_operators():
    np.testing.assert_allclose(weyl_unitary(1, 0, 2), PAULI_X)
    np.testing.assert_allclose(weyl_unitary(0, 1, 2), PAULI_Z)
    U = weyl_basis(3)
    gram = np.einsum("iab,jab->ij", U.conj(), U)
    np.testing.assert_allclose(gram, 3 * np.eye(9), atol=1e-12)
    assert all(is_unitary(u) for u in U)
    with pytest.raises(ValueError):
        weyl_unitary(3, 0, 3)


def test_bell_vectors_orthonormal():
    B = bell_vectors(3)
    np.testing.assert_allclose(B.conj() @ B.T, np.eye(9), atol=1e-12)


def test_haar_unitary_properties():
    rng = make_rng(5)
    for d in (1, 2, 3, 5):
        U = haar_unitary(d, rng)
        assert np.linalg.norm(U.conj().T @ U - np.eye(d)) <= 1e-12
    np.testing.assert_array_equal(haar_unitary(3, make_rng(9)), haar_unitary(3, make_rng(9)))


def test_haar_second_moment_matches_schur_average():
    K = 100_000
    U = haar_unitaries(K, 2, make_rng(2024))
    avg = np.einsum("kab,kcd->acbd", U, U.conj()).reshape(4, 4) / K
    I = vectorize(np.eye(2))
    omega = np.outer(I, I) / 2
    assert np.linalg.norm(avg - omega, 2) <= 5 / np.sqrt(K)


def test_substreams_are_independent_and_reproducible():
    a = substream(7, 0).random(4)
    np.testing.assert_array_equal(a, substream(7, 0).random(4))
    assert not np.allclose(a, substream(7, 1).random(4))
    assert not np.allclose(a, substream(8, 0).random(4))


def test_predicates(rng):
    H = random_hermitian(rng, 3)
    assert is_hermitian(H)
    assert not is_hermitian(H + 1e-6j * np.diag([1, 0, 0]))
    assert is_psd(H @ H)
    assert not is_psd(-np.eye(2))
    assert not is_unitary(2 * np.eye(2))


def test_psd_sqrt_examples(rng):
    np.testing.assert_allclose(psd_sqrt(np.eye(2) / 4), np.eye(2) / 2, atol=1e-15)
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    A = random_hermitian(rng, 3)
    P = A @ A
    S = psd_sqrt(P)
    np.testing.assert_allclose(S @ S, P, atol=1e-10)
    # tiny negative drift is clipped
    np.testing.assert_allclose(psd_sqrt(np.diag([1.0, -1e-14])), np.diag([1.0, 0.0]))
    with pytest.raises(ValidationError):
        psd_sqrt(np.diag([1.0, -1e-3]))
    with pytest.raises(ValidationError):
        psd_sqrt(np.array([[1, 1], [0, 1]], dtype=complex))


def test_pseudo_inverse_examples():
    np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    with pytest.raises(ValidationError):
        pseudo_inverse(np.array([[1, 1], [0, 1]], dtype=complex))


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 4), st.data())
def test_pseudo_inverse_moore_penrose(seed, d, data):
    n = d * d
    rank = data.draw(st.integers(1, n))
    A = random_hermitian(make_rng(seed), n, rank)
    P = pseudo_inverse(A)
    s = max(1.0, np.abs(A).max()) * max(1.0, np.abs(P).max())
    assert np.abs(A @ P @ A - A).max() <= 1e-10 * s * np.abs(A).max()
    assert np.abs(P @ A @ P - P).max() <= 1e-10 * s * np.abs(P).max()
    assert np.abs((A @ P) - (A @ P).conj().T).max() <= 1e-10 * s
    assert np.abs((P @ A) - (P @ A).conj().T).max() <= 1e-10 * s
