"""
Dense matrix kernel: Kronecker products, eigenvalues, norms, rank/null space
and the explicit power bound ``||A^k|| <= M * eta^k``.

All routines are thin, validated wrappers over numpy / scipy.linalg so the
rest of the package never calls LAPACK directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from quantcoop.config import MAX_EIG_DIM, RANK_TOL, ZERO_EIG_TOL
from quantcoop.models import ConvergenceError, DimensionError


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class Norms(NamedTuple):
    two_norm: float
    inf_norm: float


@dataclass(frozen=True)
class GuoBound:
    """Constants of the power bound ``||m^k|| <= m_const * eta^k``."""

    m_const: float
    """``sqrt(n) * (1 + 2/epsilon)^(n-1)``; may be ``inf`` for large n."""

    eta: float
    """``rho(m) + epsilon * ||m||``."""

    epsilon: float
    """The epsilon the constants were computed for."""

    dimension: int
    """Dimension n of the bounded matrix."""

    def bound(self, k: int) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            return float(self.m_const * np.power(self.eta, k))


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _square(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{what}: expected a square matrix, got shape {m.shape}")
    return m


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (scalars and vectors are promoted to 2-D)."""
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def eigenvalues(m: np.ndarray) -> np.ndarray:
    """All eigenvalues of a square matrix, ordered by (real part, imaginary part).

    Parameters
    ----------
    m:
        Real or complex square matrix of dimension at most ``MAX_EIG_DIM``.

    Returns
    -------
    Complex array of length n, with multiplicity.

    Raises
    ------
    DimensionError:
        If ``m`` is not square or exceeds the dimension limit.
    ConvergenceError:
        If the QR iteration inside LAPACK fails to converge.
    """
    m = _square(m, "eigenvalues")
    n = m.shape[0]
    if n > MAX_EIG_DIM:
        raise DimensionError(f"eigenvalues: dimension {n} exceeds limit {MAX_EIG_DIM}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    try:
        vals = sla.eigvals(m, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc
    vals = np.asarray(vals, dtype=complex)
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def spectral_radius(m: np.ndarray) -> float:
    """Largest eigenvalue modulus; 0 for an empty matrix."""
    vals = eigenvalues(m)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def norms(m: np.ndarray) -> Norms:
    """Two-norm and infinity-norm.

    For matrices the infinity norm is the largest absolute row sum; for
    vectors it is the largest absolute entry.
    """
    arr = np.asarray(m)
    if arr.size == 0:
        return Norms(0.0, 0.0)
    if arr.ndim == 1:
        return Norms(float(np.linalg.norm(arr)), float(np.max(np.abs(arr))))
    return Norms(float(np.linalg.norm(arr, 2)), float(np.linalg.norm(arr, np.inf)))


def two_norm(m: np.ndarray) -> float:
    return norms(m).two_norm


def inf_norm(m: np.ndarray) -> float:
    return norms(m).inf_norm


def rank_and_nullspace(m: np.ndarray, tol: float = RANK_TOL) -> tuple[int, np.ndarray]:
    """Numerical rank and an orthonormal basis of the right null space.

    Parameters
    ----------
    m:
        Real or complex matrix.
    tol:
        Singular values at or below ``tol * sigma_max`` count as zero.

    Returns
    -------
    (rank, basis)
        basis has one column per null direction (shape ``cols x (cols - rank)``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    arr = np.atleast_2d(np.asarray(m))
    cols = arr.shape[1]
    if arr.size == 0:
        return 0, np.eye(cols, dtype=arr.dtype if cols else float)
    _, s, vh = sla.svd(arr, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    basis = vh[rank:].conj().T
    return rank, basis


def is_zero_eigenvalue(value: complex, scale: float) -> bool:
    """Zero classification used for Laplacian eigenvalues: ``|lambda| <= tol * max(1, scale)``."""
    return abs(value) <= ZERO_EIG_TOL * max(1.0, scale)


def guo_power_bound(m: np.ndarray, epsilon: float) -> GuoBound:
    """Explicit constants with ``||m^k||_2 <= M * eta^k`` for every k >= 0.

    ``M = sqrt(n) * (1 + 2/epsilon)^(n-1)`` and ``eta = rho(m) + epsilon * ||m||_2``.
    The exponent grows with n, so M overflows to ``inf`` rather than raising.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    m = _square(m, "guo_power_bound")
    n = m.shape[0]
    with np.errstate(over="ignore"):
        m_const = float(np.sqrt(n) * np.power(1.0 + 2.0 / epsilon, n - 1, dtype=float))
    eta = spectral_radius(m) + epsilon * two_norm(m)
    return GuoBound(m_const=m_const, eta=float(eta), epsilon=float(epsilon), dimension=n)


def matrix_powers_norms(m: np.ndarray, k_max: int) -> np.ndarray:
    """``||m^k||_2`` for k = 0..k_max by repeated multiplication."""
    m = _square(m, "matrix_powers_norms")
    out = np.empty(k_max + 1)
    power = np.eye(m.shape[0], dtype=m.dtype)
    for k in range(k_max + 1):
        out[k] = two_norm(power)
        power = power @ m
    return out
