"""
Directed weighted communication topology.

Agents are numbered 1..N at the edges of the package (configs, frames,
reports) and 0..N-1 inside arrays. An edge ``(j, i, w)`` means agent j
transmits to agent i, so ``a_ij = w`` and j is an in-neighbour of i.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from quantcoop.config import PI_CLAMP
from quantcoop.models import ConvergenceError, NetworkError
from quantcoop.numerics import eigenvalues, inf_norm, is_zero_eigenvalue, rank_and_nullspace


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Network:
    """Communication graph with its cached Laplacian ``L = D - A``."""

    n_agents: int
    adjacency: np.ndarray
    laplacian: np.ndarray

    def in_neighbors(self, i: int) -> list[int]:
        """0-based indices j with ``a_ij > 0``."""
        return [int(j) for j in np.flatnonzero(self.adjacency[i] > 0)]

    def out_neighbors(self, j: int) -> list[int]:
        """0-based indices i that receive from j."""
        return [int(i) for i in np.flatnonzero(self.adjacency[:, j] > 0)]

    @property
    def channels(self) -> list[tuple[int, int]]:
        """Every directed channel as 0-based ``(sender, receiver)``, receiver-major."""
        return [(j, i) for i in range(self.n_agents) for j in self.in_neighbors(i)]

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        """Edges in the 1-based ``(from, to, weight)`` form accepted by ``build_network``."""
        return [(j + 1, i + 1, float(self.adjacency[i, j])) for j, i in self.channels]

    @property
    def is_undirected(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))


@dataclass(frozen=True)
class NetworkSpectrum:
    """Laplacian eigenvalues and the normalised left zero-eigenvector."""

    eigenvalues: np.ndarray
    """N complex eigenvalues ascending by real part; the first is zero."""

    pi: np.ndarray
    """Nonnegative left zero-eigenvector with entries summing to one."""

    lambda2_nonzero: bool
    """True if zero is a simple eigenvalue."""

    ambiguous: bool = False
    """True if the left null space has dimension greater than one."""

    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class LaplacianSplit:
    """Schur-based block split ``Phi L Phi^-1 = diag(0, T22)``.

    ``Phi`` stacks ``pi^T`` on top of the conjugate-transposed trailing Schur
    vectors, so its first row is the consensus direction and the remaining
    rows map disagreement vectors into the coordinates where the Laplacian
    acts as the upper triangular block ``T22``.
    """

    phi: np.ndarray
    phi_inv: np.ndarray
    t22: np.ndarray

    @property
    def phi_bar(self) -> np.ndarray:
        """Rows 2..N of ``Phi``."""
        return self.phi[1:]

    @property
    def condition(self) -> float:
        """``||Phi|| * ||Phi^-1||`` in the two-norm."""
        return float(np.linalg.norm(self.phi, 2) * np.linalg.norm(self.phi_inv, 2))


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def build_network(n: int, edges: Iterable[Sequence[float]]) -> Network:
    """Build a network from 1-based ``(from, to)`` or ``(from, to, weight)`` triples.

    Raises
    ------
    NetworkError:
        For a non-positive agent count, self loops, out-of-range nodes,
        duplicate edges or non-positive weights.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise NetworkError(f"agent count must be a positive integer, got {n!r}")
    adjacency = np.zeros((n, n))
    seen: set[tuple[int, int]] = set()
    for edge in edges:
        if len(edge) not in (2, 3):
            raise NetworkError(f"edge {edge!r}: expected (from, to) or (from, to, weight)")
        j, i = edge[0], edge[1]
        weight = float(edge[2]) if len(edge) == 3 else 1.0
        if int(j) != j or int(i) != i:
            raise NetworkError(f"edge {edge!r}: node ids must be integers")
        j, i = int(j), int(i)
        if not (1 <= j <= n and 1 <= i <= n):
            raise NetworkError(f"edge ({j}->{i}): node out of range 1..{n}")
        if j == i:
            raise NetworkError(f"edge ({j}->{i}): self loops are not allowed")
        if not np.isfinite(weight) or weight <= 0:
            raise NetworkError(f"edge ({j}->{i}): weight must be positive, got {weight}")
        if (j, i) in seen:
            raise NetworkError(f"edge ({j}->{i}): duplicate")
        seen.add((j, i))
        adjacency[i - 1, j - 1] = weight
    laplacian = np.diag(adjacency.sum(axis=1)) - adjacency
    adjacency.setflags(write=False)
    laplacian.setflags(write=False)
    return Network(n_agents=int(n), adjacency=adjacency, laplacian=laplacian)


# ---------------------------------------------------------------------------
# Reachability
# ---------------------------------------------------------------------------


def _reachable_from(net: Network, root: int) -> set[int]:
    """Agents reachable from ``root`` following the information flow j -> i."""
    visited = {root}
    queue = deque([root])
    while queue:
        current = queue.popleft()
        for nxt in net.out_neighbors(current):
            if nxt not in visited:
                visited.add(nxt)
                queue.append(nxt)
    return visited


def _root_components(net: Network) -> list[list[int]]:
    """Closed strong components: sets no outside agent transmits into."""
    reach = [_reachable_from(net, r) for r in range(net.n_agents)]
    components: list[list[int]] = []
    assigned: set[int] = set()
    for r in range(net.n_agents):
        if r in assigned:
            continue
        upstream = {j for j in range(net.n_agents) if r in reach[j]}
        if upstream <= reach[r]:
            component = sorted(upstream)
            assigned.update(component)
            components.append(component)
    return components


def _traversal_spanning_tree(net: Network) -> bool:
    return any(len(_reachable_from(net, r)) == net.n_agents for r in range(net.n_agents))


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


def _normalise_pi(v: np.ndarray) -> np.ndarray:
    v = np.real_if_close(v, tol=1000).real.astype(float)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    v = v / v.sum()
    v[v < PI_CLAMP] = 0.0
    return v / v.sum()


def _component_pi(net: Network, component: list[int]) -> np.ndarray:
    sub = net.laplacian[np.ix_(component, component)]
    _, basis = rank_and_nullspace(sub.T)
    pi = np.zeros(net.n_agents)
    pi[component] = _normalise_pi(basis[:, 0])
    return pi


def spectrum(net: Network) -> NetworkSpectrum:
    """Laplacian eigenvalues, ``pi`` and the simple-zero test.

    For graphs with several closed strong components the left null space is
    not one-dimensional; ``pi`` is then returned for the first such component
    and the result is flagged ``ambiguous``.
    """
    lap = net.laplacian
    vals = eigenvalues(lap)
    scale = inf_norm(lap)
    zero_count = sum(is_zero_eigenvalue(v, scale) for v in vals)
    _, basis = rank_and_nullspace(lap.T)
    warnings: list[str] = []
    ambiguous = basis.shape[1] > 1
    if basis.shape[1] == 0:
        raise ConvergenceError("Laplacian has no numerical left null vector")
    if ambiguous:
        component = _root_components(net)[0]
        pi = _component_pi(net, component)
        warnings.append(
            f"pi is not unique ({basis.shape[1]} closed components); "
            f"using the component of agents {[c + 1 for c in component]}"
        )
    else:
        pi = _normalise_pi(basis[:, 0])
    return NetworkSpectrum(
        eigenvalues=vals,
        pi=pi,
        lambda2_nonzero=zero_count == 1,
        ambiguous=ambiguous,
        warnings=warnings,
    )


def has_spanning_tree(net: Network, spec: NetworkSpectrum | None = None) -> bool:
    """True if some agent reaches all others; cross-checked against the spectrum.

    Raises
    ------
    ConvergenceError:
        If traversal and the simple-zero eigenvalue test disagree, which
        signals a numerically marginal second eigenvalue.
    """
    found = _traversal_spanning_tree(net)
    spec = spec or spectrum(net)
    if found != spec.lambda2_nonzero:
        raise ConvergenceError(
            f"spanning-tree traversal says {found} but the Laplacian spectrum says "
            f"{spec.lambda2_nonzero}; lambda_2 is numerically marginal"
        )
    return found


# ---------------------------------------------------------------------------
# Block split
# ---------------------------------------------------------------------------


def laplacian_split(net: Network, spec: NetworkSpectrum | None = None) -> LaplacianSplit:
    """Complex Schur split of the Laplacian with the zero eigenvalue leading.

    Schur vectors are phase-normalised (largest entry made real positive) so
    that the transform is real whenever the Laplacian spectrum is real.
    """
    spec = spec or spectrum(net)
    lap = net.laplacian
    n = net.n_agents
    if n == 1:
        one = np.ones((1, 1), dtype=complex)
        return LaplacianSplit(phi=one, phi_inv=one, t22=np.zeros((0, 0), dtype=complex))
    if not spec.lambda2_nonzero:
        raise NetworkError("the block split needs a simple zero Laplacian eigenvalue (spanning tree)")
    tol = 1e-8 * max(1.0, inf_norm(lap))
    try:
        _, z, _ = sla.schur(lap.astype(complex), output="complex", sort=lambda x: abs(x) <= tol)
    except (sla.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"Schur decomposition of the Laplacian failed: {exc}") from exc
    for col in range(n):
        k = np.argmax(np.abs(z[:, col]))
        z[:, col] *= np.conj(z[k, col]) / abs(z[k, col])
    z2 = z[:, 1:]
    t22 = z2.conj().T @ lap @ z2
    t22 = np.triu(t22)
    phi = np.vstack([spec.pi.astype(complex)[None, :], z2.conj().T])
    phi_inv = sla.inv(phi)
    return LaplacianSplit(phi=phi, phi_inv=phi_inv, t22=t22)
