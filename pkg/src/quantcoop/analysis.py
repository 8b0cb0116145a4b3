"""
Agent dynamics and the standing-assumption checkers.

Checks return result objects carrying a verdict and a certificate instead of
raising, so callers can report every failed condition at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from quantcoop.config import EIG_CLUSTER_TOL, UNSTABLE_TOL, ZERO_EIG_TOL
from quantcoop.graph import LaplacianSplit, NetworkSpectrum
from quantcoop.models import DimensionError
from quantcoop.numerics import eigenvalues, inf_norm, kron, rank_and_nullspace, spectral_radius
from quantcoop.utils import as_matrix


# ---------------------------------------------------------------------------
# Plant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LtiPlant:
    """Shared agent dynamics ``x(t+1) = A x(t) + B u(t)``, ``y(t) = C x(t)``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        a = as_matrix(self.a, "A")
        b = as_matrix(self.b, "B")
        c = as_matrix(self.c, "C")
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionError(f"A: expected a square matrix, got shape {a.shape}")
        if b.shape[0] != n:
            if b.shape == (1, n):
                b = b.T
            else:
                raise DimensionError(f"B: expected {n} rows, got shape {b.shape}")
        if c.shape[1] != n:
            if c.shape == (n, 1):
                c = c.T
            else:
                raise DimensionError(f"C: expected {n} columns, got shape {c.shape}")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def p(self) -> int:
        return self.c.shape[0]

    def gain(self, values, name: str = "K") -> np.ndarray:
        """Coerce an ``m x n`` control gain."""
        k = as_matrix(values, name)
        if k.shape != (self.m, self.n):
            if k.shape == (self.n, self.m) and self.m == 1:
                k = k.T
            else:
                raise DimensionError(f"{name}: expected shape {(self.m, self.n)}, got {k.shape}")
        return k

    def observer_gain(self, values, name: str = "G") -> np.ndarray:
        """Coerce an ``n x p`` observer gain."""
        g = as_matrix(values, name)
        if g.shape != (self.n, self.p):
            if g.shape == (self.p, self.n) and self.p == 1:
                g = g.T
            else:
                raise DimensionError(f"{name}: expected shape {(self.n, self.p)}, got {g.shape}")
        return g

    def unstable_eigenvalues(self) -> np.ndarray:
        vals = eigenvalues(self.a)
        return vals[np.abs(vals) >= 1.0 - UNSTABLE_TOL]

    def transpose(self) -> LtiPlant:
        """Dual plant ``(A^T, C^T, B^T)`` used by the observer-gain search."""
        return LtiPlant(a=self.a.T, b=self.c.T, c=self.b.T)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class PbhResult:
    """Verdict of a PBH rank test."""

    holds: bool
    failing: list[tuple[complex, np.ndarray]] = field(default_factory=list)
    """Unstable eigenvalues that lose rank, each with a null vector."""


@dataclass
class A1Result:
    holds: bool
    worst_radius: float
    radii: list[float] = field(default_factory=list)
    """``rho(A - lambda_i B K)`` for i = 2..N."""


@dataclass
class A1PrimeResult:
    holds: bool
    lhs: float
    rhs: float
    stabilizable: bool
    omega: float = 0.0
    """Minimiser of ``max_j |1 - omega lambda_j|``."""


# ---------------------------------------------------------------------------
# PBH tests
# ---------------------------------------------------------------------------


def reachable_subspace(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``span{b, a b, a^2 b, ...}`` by Krylov deflation.

    Each pass appends ``a`` times the current basis and re-orthonormalises
    with an SVD rank test, stopping once the dimension no longer grows.
    """
    n = a.shape[0]
    basis = np.zeros((n, 0), dtype=np.result_type(a, b))
    block = np.asarray(b)
    for _ in range(n):
        stacked = np.hstack([basis, block])
        rank, _ = rank_and_nullspace(stacked.T)
        u, _, _ = sla.svd(stacked)
        new_basis = u[:, :rank]
        if new_basis.shape[1] == basis.shape[1]:
            break
        basis = new_basis
        block = a @ basis
    return basis


def orthogonal_complement(basis: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of the complement of ``range(basis)`` in ``R^n`` (or ``C^n``)."""
    if basis.shape[1] == 0:
        return np.eye(n, dtype=basis.dtype)
    _, complement = rank_and_nullspace(basis.conj().T)
    return complement


def eigenvalue_clusters(vals: np.ndarray, tol: float = EIG_CLUSTER_TOL) -> list[list[int]]:
    """Group eigenvalue indices whose values agree to ``tol * max(1, |lambda|)``.

    A defective eigenvalue comes back from the QR iteration split into
    several values about ``sqrt(eps)`` apart; the cluster mean recovers it.
    """
    clusters: list[list[int]] = []
    centres: list[complex] = []
    for idx in np.lexsort((vals.imag, vals.real)):
        v = vals[idx]
        for c, centre in enumerate(centres):
            if abs(v - centre) <= tol * max(1.0, abs(centre)):
                clusters[c].append(int(idx))
                centres[c] = complex(np.mean(vals[clusters[c]]))
                break
        else:
            clusters.append([int(idx)])
            centres.append(complex(v))
    return clusters


def _hidden_modes(a: np.ndarray, hidden: np.ndarray, left: bool) -> PbhResult:
    """Unstable modes of ``a`` on the invariant (or quotient) coordinates ``hidden``.

    With orthonormal ``W`` spanning the hidden coordinates, ``W^H A W`` carries
    exactly the modes that the rank test would lose. Certificates are mapped
    back through W: right eigenvectors when ``range(W)`` is A-invariant, left
    eigenvectors when its complement is.
    """
    if hidden.shape[1] == 0:
        return PbhResult(holds=True)
    reduced = hidden.conj().T @ a @ hidden
    vals, left_vecs, right_vecs = sla.eig(reduced, left=True, right=True)
    vecs = left_vecs if left else right_vecs
    failing: list[tuple[complex, np.ndarray]] = []
    for cluster in eigenvalue_clusters(vals):
        centre = complex(np.mean(vals[cluster]))
        if abs(centre) < 1.0 - UNSTABLE_TOL:
            continue
        vec = hidden @ vecs[:, cluster[0]]
        failing.append((centre, vec / np.linalg.norm(vec)))
    return PbhResult(holds=not failing, failing=failing)


def check_detectability(plant: LtiPlant) -> PbhResult:
    """``rank [A - lambda I; C] = n`` for every eigenvalue with ``|lambda| >= 1``.

    Decided on the unobservable subspace, the complement of the Krylov space
    of ``(A^T, C^T)``: the pair is detectable iff A restricted there has no
    mode on or outside the unit circle. Repeated eigenvalues give one
    certificate per cluster, a right eigenvector invisible through C.
    """
    observable = reachable_subspace(plant.a.T, plant.c.T)
    return _hidden_modes(plant.a, orthogonal_complement(observable, plant.n), left=False)


def check_stabilizability(plant: LtiPlant) -> PbhResult:
    """``rank [A - lambda I, B] = n`` for every eigenvalue with ``|lambda| >= 1``.

    Decided on the quotient by the controllable subspace. Each failing
    cluster carries a left eigenvector orthogonal to the columns of B.
    """
    controllable = reachable_subspace(plant.a, plant.b)
    return _hidden_modes(plant.a, orthogonal_complement(controllable, plant.n), left=True)


# ---------------------------------------------------------------------------
# Simultaneous stabilizability
# ---------------------------------------------------------------------------


def nonzero_laplacian_eigenvalues(spec: NetworkSpectrum) -> np.ndarray:
    """``lambda_2 .. lambda_N``: the spectrum with the leading zero removed."""
    return spec.eigenvalues[1:]


def check_a1(plant: LtiPlant, spec: NetworkSpectrum, k: np.ndarray) -> A1Result:
    """``max_{i >= 2} rho(A - lambda_i B K) < 1``, in complex arithmetic."""
    k = plant.gain(k)
    bk = plant.b @ k
    radii = [spectral_radius(plant.a - lam * bk) for lam in nonzero_laplacian_eigenvalues(spec)]
    worst = max(radii) if radii else 0.0
    return A1Result(holds=worst < 1.0, worst_radius=float(worst), radii=[float(r) for r in radii])


def a1_prime_infimum(lams: np.ndarray) -> tuple[float, float]:
    """``inf_omega max_j |1 - omega lambda_j|`` over real omega, with its minimiser.

    Laplacian eigenvalues have nonnegative real parts, so negative omega never
    beats omega = 0, and for ``omega > 2 Re(lambda)/|lambda|^2`` that term
    alone exceeds one. The search is a bounded scalar minimisation on the
    remaining bracket.
    """
    lams = np.asarray(lams, dtype=complex)
    if lams.size == 0:
        return 0.0, 0.0
    scale = max(1.0, float(np.max(np.abs(lams))))
    if np.any(np.abs(lams) <= ZERO_EIG_TOL * scale) or np.any(lams.real <= 0):
        return 1.0, 0.0
    upper = float(np.min(2.0 * lams.real / np.abs(lams) ** 2))

    def objective(omega: float) -> float:
        return float(np.max(np.abs(1.0 - omega * lams)))

    res = minimize_scalar(objective, bounds=(0.0, upper), method="bounded", options={"xatol": 1e-13})
    best_omega, best = float(res.x), float(res.fun)
    if best >= 1.0:
        return 1.0, 0.0
    return best, best_omega


def check_a1_prime(plant: LtiPlant, spec: NetworkSpectrum) -> A1PrimeResult:
    """Single-input condition ``prod |lambda^u(A)| < 1 / inf_omega max_j |1 - omega lambda_j|``.

    Raises
    ------
    DimensionError:
        If the plant has more than one input.
    """
    if plant.m != 1:
        raise DimensionError(f"the product condition applies to single-input plants, got m = {plant.m}")
    unstable = plant.unstable_eigenvalues()
    lhs = float(np.prod(np.abs(unstable))) if unstable.size else 0.0
    inf_value, omega = a1_prime_infimum(nonzero_laplacian_eigenvalues(spec))
    rhs = float("inf") if inf_value <= 1e-15 else 1.0 / inf_value
    stabilizable = check_stabilizability(plant).holds
    return A1PrimeResult(holds=stabilizable and lhs < rhs, lhs=lhs, rhs=rhs, stabilizable=stabilizable, omega=omega)


def undirected_a1_prime_rhs(spec: NetworkSpectrum) -> float:
    """Closed form ``(1 + l2/lN) / (1 - l2/lN)`` for symmetric Laplacians."""
    lams = np.sort(nonzero_laplacian_eigenvalues(spec).real)
    ratio = lams[0] / lams[-1]
    return float((1 + ratio) / (1 - ratio)) if ratio < 1 else float("inf")


# ---------------------------------------------------------------------------
# Closed-loop block matrices
# ---------------------------------------------------------------------------


def observer_error_matrix(plant: LtiPlant, g: np.ndarray, n_agents: int) -> np.ndarray:
    """``J(G) = I_N (x) (A - G C)``."""
    return kron(np.eye(n_agents), plant.a - g @ plant.c)


def coupling_matrix(plant: LtiPlant, split: LaplacianSplit, k: np.ndarray) -> np.ndarray:
    """``W(B, K) = T22 (x) B K``."""
    return kron(split.t22, plant.b @ k)


def disagreement_matrix(plant: LtiPlant, split: LaplacianSplit, k: np.ndarray) -> np.ndarray:
    """``Jbar(K) = I_{N-1} (x) A - T22 (x) B K``."""
    size = split.t22.shape[0]
    return kron(np.eye(size), plant.a).astype(complex) - coupling_matrix(plant, split, k)


def closed_loop_block(
    plant: LtiPlant, laplacian: np.ndarray, split: LaplacianSplit, k: np.ndarray, g: np.ndarray
) -> np.ndarray:
    """``A(K, G) = [[J(G), 0], [(Phibar (x) I)(L (x) B K), Jbar(K)]]``.

    The lower-left block feeds observer errors into the disagreement
    coordinates; block triangularity makes the spectrum the union of the
    spectra of ``J(G)`` and ``Jbar(K)``.
    """
    n_agents = laplacian.shape[0]
    n = plant.n
    upper = observer_error_matrix(plant, g, n_agents).astype(complex)
    lower_left = kron(split.phi_bar, np.eye(n)) @ kron(laplacian, plant.b @ k)
    lower_right = disagreement_matrix(plant, split, k)
    top = np.hstack([upper, np.zeros((n_agents * n, lower_right.shape[1]), dtype=complex)])
    bottom = np.hstack([lower_left, lower_right])
    return np.vstack([top, bottom])


def output_inf_norm(plant: LtiPlant) -> float:
    return inf_norm(plant.c)
