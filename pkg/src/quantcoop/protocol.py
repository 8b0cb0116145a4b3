"""
Certainty-equivalence control laws.

Each agent feeds back the decoded estimates of its in-neighbours:

    consensus  u_i = K  sum_j a_ij (xh_ji - xh_i)
    formation  u_i = K  sum_j a_ij (xh_ji - xh_i - b_ij),   b_ij = h_j - h_i
    tracking   u_i = K1 sum_j a_ij (xh_ji - xh_i) + K2 b_i0 (xh_0i - xh_i)
    mixed      u_i = K1 x_i + K2 sum_j a_ij (xh_ji - xh_i)

Only the consensus law carries the synthesis guarantees; the others are
simulated as extensions.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Literal

import numpy as np

from quantcoop.models import ConfigError, DimensionError, ProtocolViolation

Variant = Literal["consensus", "formation", "tracking", "mixed"]
VARIANTS: tuple[str, ...] = ("consensus", "formation", "tracking", "mixed")


@dataclass(frozen=True)
class ControlLaw:
    """Law variant with its gains; ``k2`` is the second gain of tracking and mixed laws."""

    variant: Variant
    k: np.ndarray
    k2: np.ndarray | None = None
    offsets: np.ndarray | None = None
    """Per-agent formation offsets h, shape ``N x n``."""
    leader_weights: np.ndarray | None = None
    """``b_i0 >= 0`` per follower, tracking only."""
    gain_bound: float = float("inf")
    """Declared protocol-set bound ``L_K`` on the gain norm."""

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown control law variant {self.variant!r}")
        if self.variant in ("tracking", "mixed") and self.k2 is None:
            raise ConfigError(f"{self.variant} law needs two gains")
        if self.variant == "formation" and self.offsets is None:
            raise ConfigError("formation law needs per-agent offsets")
        if self.variant == "tracking" and self.leader_weights is None:
            raise ConfigError("tracking law needs leader weights")
        if self.leader_weights is not None and np.any(np.asarray(self.leader_weights) < 0):
            raise ConfigError("leader weights must be nonnegative")
        for gain in (self.k, self.k2):
            if gain is not None and np.linalg.norm(gain, 2) >= self.gain_bound:
                raise ConfigError(f"gain norm {np.linalg.norm(gain, 2):.6g} violates the bound {self.gain_bound}")

    # -- constructors --------------------------------------------------------

    @classmethod
    def consensus(cls, k: np.ndarray) -> ControlLaw:
        return cls("consensus", np.atleast_2d(k))

    @classmethod
    def formation(cls, k: np.ndarray, offsets: np.ndarray) -> ControlLaw:
        return cls("formation", np.atleast_2d(k), offsets=np.asarray(offsets, dtype=float))

    @classmethod
    def tracking(cls, k1: np.ndarray, k2: np.ndarray, leader_weights: np.ndarray) -> ControlLaw:
        return cls(
            "tracking", np.atleast_2d(k1), k2=np.atleast_2d(k2), leader_weights=np.asarray(leader_weights, float)
        )

    @classmethod
    def mixed(cls, k1: np.ndarray, k2: np.ndarray) -> ControlLaw:
        return cls("mixed", np.atleast_2d(k1), k2=np.atleast_2d(k2))

    # -- views ---------------------------------------------------------------

    @property
    def distributed_gain(self) -> np.ndarray:
        """Gain multiplying the relative-estimate sum."""
        return self.k2 if self.variant == "mixed" else self.k

    @property
    def has_convergence_guarantee(self) -> bool:
        return self.variant == "consensus"

    def edge_offset(self, i: int, j: int) -> np.ndarray:
        """``b_ij = h_j - h_i`` (0-based agents)."""
        return self.offsets[j] - self.offsets[i]


def _relative_sum(
    i: int,
    own_estimate: np.ndarray,
    neighbor_estimates: Mapping[int, np.ndarray],
    adjacency_row: np.ndarray,
    law: ControlLaw | None = None,
) -> np.ndarray:
    expected = {int(j) for j in np.flatnonzero(np.asarray(adjacency_row) > 0)}
    got = set(neighbor_estimates)
    if got != expected:
        missing = sorted(j + 1 for j in expected - got)
        extra = sorted(j + 1 for j in got - expected)
        raise ProtocolViolation(f"agent {i + 1}: neighbour estimates missing {missing}, unexpected {extra}")
    total = np.zeros_like(own_estimate, dtype=float)
    for j in sorted(expected):
        est = np.asarray(neighbor_estimates[j], dtype=float).reshape(-1)
        if est.shape != own_estimate.shape:
            raise DimensionError(f"agent {i + 1}: estimate of agent {j + 1} has length {est.size}")
        diff = est - own_estimate
        if law is not None and law.variant == "formation":
            diff = diff - law.edge_offset(i, j)
        total = total + adjacency_row[j] * diff
    return total


def control_input(
    law: ControlLaw,
    i: int,
    own_estimate: np.ndarray,
    neighbor_estimates: Mapping[int, np.ndarray],
    adjacency_row: np.ndarray,
    own_state: np.ndarray | None = None,
    leader_estimate: np.ndarray | None = None,
) -> np.ndarray:
    """Control of agent ``i`` (0-based) from its own and its neighbours' estimates.

    Parameters
    ----------
    neighbor_estimates:
        Decoded estimates ``xh_ji`` keyed by 0-based sender, exactly one per
        in-neighbour.
    own_state:
        True state ``x_i``, required by the mixed law only.
    leader_estimate:
        Decoded leader estimate ``xh_0i``; required by the tracking law when
        ``b_i0 > 0``.

    Raises
    ------
    ProtocolViolation:
        If a neighbour estimate is missing or unexpected.
    DimensionError:
        If estimate lengths do not conform.
    """
    own_estimate = np.asarray(own_estimate, dtype=float).reshape(-1)
    rel = _relative_sum(i, own_estimate, neighbor_estimates, np.asarray(adjacency_row, dtype=float), law)
    if law.variant in ("consensus", "formation"):
        return law.k @ rel
    if law.variant == "tracking":
        u = law.k @ rel
        weight = float(law.leader_weights[i])
        if weight > 0:
            if leader_estimate is None:
                raise ProtocolViolation(f"agent {i + 1}: leader estimate missing")
            u = u + weight * (law.k2 @ (np.asarray(leader_estimate, dtype=float) - own_estimate))
        return u
    if own_state is None:
        raise ProtocolViolation(f"agent {i + 1}: mixed law needs the agent's own state")
    return law.k @ np.asarray(own_state, dtype=float).reshape(-1) + law.k2 @ rel


def precise_control_input(k: np.ndarray, i: int, states: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """``K sum_j a_ij (x_j - x_i)`` from true states; the no-quantization baseline."""
    states = np.asarray(states, dtype=float)
    row = np.asarray(adjacency, dtype=float)[i]
    neighbors = {int(j): states[j] for j in np.flatnonzero(row > 0)}
    return np.atleast_2d(k) @ _relative_sum(i, states[i], neighbors, row)


def stacked_consensus_inputs(laplacian: np.ndarray, k: np.ndarray, estimates: np.ndarray) -> np.ndarray:
    """``U = -(L (x) K) Xhat`` for estimates shaped ``N x n``; returns ``N x m``."""
    estimates = np.asarray(estimates, dtype=float)
    return -(np.asarray(laplacian) @ estimates) @ np.atleast_2d(k).T
