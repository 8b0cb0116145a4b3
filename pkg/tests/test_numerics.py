"""Dense kernel: Kronecker products, spectra, norms, null spaces, power bounds."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantcoop.models import DimensionError
from quantcoop.numerics import (
    eigenvalues,
    guo_power_bound,
    inf_norm,
    kron,
    matrix_powers_norms,
    norms,
    rank_and_nullspace,
    spectral_radius,
    two_norm,
)

A = np.array([[1.0, 0.1], [0.0, 0.5]])
B = np.array([[1.0], [1.0]])
K = np.array([[0.2, 0.0]])
LAPLACIAN = np.array([[1, -1, 0, 0], [-1, 1, 0, 0], [-1, 0, 1, 0], [0, -1, 0, 1]], dtype=float)


def test_kron_identity_and_scalar():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(kron(np.array([[2.0]]), B), 2 * B)
    assert kron(2.0, B).shape == (2, 1)


def test_kron_blocks_match_naive_loops():
    bk = B @ K
    out = kron(LAPLACIAN, bk)
    assert out.shape == (8, 8)
    for i in range(4):
        for j in range(4):
            for r in range(2):
                for c in range(2):
                    assert out[2 * i + r, 2 * j + c] == LAPLACIAN[i, j] * bk[r, c]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), m=st.integers(1, 3))
def test_kron_mixed_product(seed, n, m):
    rng = np.random.default_rng(seed)
    a, c = rng.normal(size=(n, n)), rng.normal(size=(n, n))
    b, d = rng.normal(size=(m, m)), rng.normal(size=(m, m))
    assert np.allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d))


def test_eigenvalues_ordering():
    assert np.allclose(eigenvalues(np.diag([1.0, 0.5])), [0.5, 1.0])
    assert np.allclose(eigenvalues(LAPLACIAN), [0, 1, 1, 2], atol=1e-9)


def test_eigenvalues_complex_pair():
    vals = eigenvalues(A - 2 * B @ K)
    assert np.allclose(np.abs(vals), np.sqrt(0.34))
    assert vals[0].imag < 0 < vals[1].imag


def test_eigenvalues_rejects_bad_input():
    with pytest.raises(DimensionError):
        eigenvalues(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        eigenvalues(np.eye(65))


def test_spectral_radius():
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    assert spectral_radius(A) == pytest.approx(1.0)


def test_norms_of_worked_example_matrix():
    assert inf_norm(A) == pytest.approx(1.1)
    x = np.ones(2)
    for _ in range(200):
        x = A.T @ A @ x
        x /= np.linalg.norm(x)
    assert two_norm(A) == pytest.approx(np.sqrt(x @ A.T @ A @ x), rel=1e-10)
    assert norms(np.array([3.0, -4.0])) == (5.0, 4.0)
    assert norms(np.zeros((0, 0))) == (0.0, 0.0)


def test_rank_and_nullspace():
    rank, basis = rank_and_nullspace(np.array([[1.0, 2.0], [2.0, 4.0]]))
    assert rank == 1
    assert basis.shape == (2, 1)
    assert np.allclose(np.array([[1.0, 2.0]]) @ basis, 0.0)
    rank, basis = rank_and_nullspace(np.eye(3))
    assert rank == 3 and basis.shape == (3, 0)
    with pytest.raises(ValueError):
        rank_and_nullspace(np.eye(2), tol=0.0)


def test_guo_constants():
    bound = guo_power_bound(A, 0.1)
    assert bound.m_const == pytest.approx(np.sqrt(2) * 21.0)
    assert bound.eta == pytest.approx(1.0 + 0.1 * two_norm(A))
    assert bound.dimension == 2
    with pytest.raises(ValueError):
        guo_power_bound(A, 0.0)


def test_guo_constant_overflows_to_inf():
    assert guo_power_bound(0.5 * np.eye(60), 1e-3).m_const == float("inf")


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 3),
    epsilon=st.sampled_from([1e-3, 1e-2, 1e-1, 1.0]),
)
def test_guo_bound_dominates_powers(seed, n, epsilon):
    m = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, n))
    bound = guo_power_bound(m, epsilon)
    powers = matrix_powers_norms(m, 200)
    for k, value in enumerate(powers):
        assert value <= bound.bound(k) * (1 + 1e-9) + 1e-300


def _sweep_matrix(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    kind = seed % 4
    if kind == 0:
        return rng.uniform(-1.0, 1.0, size=(n, n))
    if kind == 1:
        return rng.standard_normal((n, n)) * rng.uniform(0.1, 3.0)
    if kind == 2:
        # defective: one Jordan block, scrambled
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        jordan = rng.uniform(0.5, 1.2) * np.eye(n) + np.eye(n, k=1)
        return q @ jordan @ q.T
    return np.triu(rng.uniform(-1.0, 1.0, size=(n, n)))


@pytest.mark.parametrize("seed", range(200))
def test_guo_bound_seeded_sweep(seed):
    m = _sweep_matrix(seed)
    powers = matrix_powers_norms(m, 100)
    for epsilon in (0.01, 0.1, 1.0):
        bound = guo_power_bound(m, epsilon)
        for k, value in enumerate(powers):
            assert value <= bound.bound(k) * (1 + 1e-9) + 1e-300


def test_matrix_powers_norms():
    out = matrix_powers_norms(np.diag([0.5, 0.25]), 3)
    assert np.allclose(out, [1.0, 0.5, 0.25, 0.125])
