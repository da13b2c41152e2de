import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oadforest.exceptions import ConvergenceError, DegenerateError, InputError
from oadforest.spectral import (fiedler_embedding, jacobi_eigh, mean_sigma, normalized_laplacian,
                                pairwise_affinity, spectral_embedding)


def oracle_fiedler(L):
    w, v = jacobi_eigh(L)
    return w, v[:, 1]


def same_up_to_sign(a, b):
    return min(np.abs(a - b).max(), np.abs(a + b).max())


def test_mean_sigma_single_pair():
    assert mean_sigma([0.0, 2.0]) == 2.0


def test_mean_sigma_three_points():
    assert mean_sigma([0.0, 1.0, 2.0]) == pytest.approx(4.0 / 3.0, abs=1e-15)


def test_mean_sigma_degenerate():
    with pytest.raises(DegenerateError):
        mean_sigma(np.ones((3, 2)))


def test_affinity_values():
    z = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 0.0]])
    A = pairwise_affinity(z, 5.0)
    assert A[0, 2] == 1.0
    assert A[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-15)
    assert A[0, 1] == pytest.approx(0.3679, abs=1e-4)
    np.testing.assert_array_equal(A, A.T)
    np.testing.assert_array_equal(np.diag(A), 1.0)


def test_affinity_decays_with_distance():
    d = np.array([0.0, 0.5, 1.0, 5.0, 50.0, 500.0])
    a = [pairwise_affinity([[0.0], [x]], 1.0)[0, 1] for x in d]
    assert np.all(np.diff(a) < 0) and a[-1] < 1e-200


def test_laplacian_two_by_two():
    L = normalized_laplacian(np.ones((2, 2)))
    np.testing.assert_allclose(L, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    w, _ = jacobi_eigh(L)
    np.testing.assert_allclose(w, [0.0, 1.0], atol=1e-15)


def test_laplacian_isolated_nodes():
    L = normalized_laplacian(np.eye(4))
    np.testing.assert_array_equal(L, np.zeros((4, 4)))


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 30), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_laplacian_invariants(m, d, seed):
    z = np.random.default_rng(seed).normal(size=(m, d))
    A = pairwise_affinity(z, mean_sigma(z))
    assert np.all((A > 0) & (A <= 1))
    L = normalized_laplacian(A)
    np.testing.assert_array_equal(L, L.T)
    w, _ = jacobi_eigh(L)
    assert abs(w[0]) <= 1e-10
    assert w[-1] <= 2.0 + 1e-10
    # D^{1/2} 1 is the null vector
    u = np.sqrt(A.sum(axis=1))
    assert np.linalg.norm(L @ u) <= 1e-10 * np.linalg.norm(u)


def test_two_cliques_split_by_sign():
    eps = 1e-6
    A = np.full((4, 4), eps)
    A[:2, :2] = A[2:, 2:] = 1.0
    L = normalized_laplacian(A)
    e = fiedler_embedding(L, np.sqrt(A.sum(axis=1))).values
    assert np.sign(e[0]) == np.sign(e[1]) != np.sign(e[2]) == np.sign(e[3])
    _, oracle = oracle_fiedler(L)
    assert same_up_to_sign(e, oracle) < 1e-8


def test_path_graph_weak_edge_is_cut():
    A = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.05], [0.0, 0.05, 1.0]])
    L = normalized_laplacian(A)
    e = fiedler_embedding(L).values
    assert np.sign(e[0]) == np.sign(e[1]) != np.sign(e[2])
    _, oracle = oracle_fiedler(L)
    assert same_up_to_sign(e, oracle) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_embedding_is_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(12, 3))
    perm = rng.permutation(12)
    e = spectral_embedding(z).values
    ep = spectral_embedding(z[perm]).values
    assert same_up_to_sign(e[perm], ep) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_embedding_invariants(m, d, seed):
    z = np.random.default_rng(seed).normal(size=(m, d))
    A = pairwise_affinity(z, mean_sigma(z))
    L = normalized_laplacian(A)
    u = np.sqrt(A.sum(axis=1))
    u /= np.linalg.norm(u)
    emb = fiedler_embedding(L, u)
    e = emb.values
    assert np.all(np.isfinite(e))
    assert np.linalg.norm(e) == pytest.approx(1.0, abs=1e-12)
    assert abs(u @ e) <= 1e-8
    np.testing.assert_allclose(L @ e, emb.eigenvalue * e, atol=1e-9)


def test_embedding_degenerate_inputs():
    with pytest.raises(DegenerateError):
        spectral_embedding(np.zeros((5, 2)))
    with pytest.raises(InputError):
        spectral_embedding(np.array([[0.0], [1.0]]))
    # equilateral triangle: lambda_2 == lambda_3
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    with pytest.raises(DegenerateError):
        spectral_embedding(tri)


def test_jacobi_identity_and_diagonal():
    w, v = jacobi_eigh(np.eye(5))
    np.testing.assert_array_equal(w, np.ones(5))
    w, v = jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(w, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(np.abs(v), np.eye(3)[:, [1, 2, 0]])


@pytest.mark.parametrize("m", [1, 2, 7, 10, 31])
def test_jacobi_reconstruction(m):
    rng = np.random.default_rng(m)
    B = rng.normal(size=(m, m))
    M = B + B.T
    w, v = jacobi_eigh(M)
    assert np.linalg.norm(v @ np.diag(w) @ v.T - M) <= 1e-8
    np.testing.assert_allclose(v.T @ v, np.eye(m), atol=1e-12)
    for i in range(m):
        assert np.linalg.norm(M @ v[:, i] - w[i] * v[:, i]) <= 1e-9
    assert np.all(np.diff(w) >= 0)


def test_jacobi_rejects_bad_input():
    with pytest.raises(InputError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InputError):
        jacobi_eigh(np.zeros((2, 3)))
    M = np.random.default_rng(0).normal(size=(8, 8))
    with pytest.raises(ConvergenceError):
        jacobi_eigh(M + M.T, max_sweeps=1)
