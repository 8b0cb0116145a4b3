"""
Executable necessity witnesses.

Each builder constructs initial conditions that defeat observation or
stabilization when a standing assumption fails, runs the primitive
simulator from them and checks the trajectory against the predicted
non-vanishing quantity:

- ``undetectable_witness``: an unobservable, non-decaying state that no
  symbol ever reveals;
- ``unstabilizable_witness``: a disagreement component living on an
  uncontrollable unstable block;
- ``schur_growth_witness``: a dominant mode of the stacked (E, delta)
  recursion that quantization noise cannot cancel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as sla

from quantcoop.analysis import (
    LtiPlant,
    check_detectability,
    check_stabilizability,
    closed_loop_block,
    orthogonal_complement,
    reachable_subspace,
)
from quantcoop.codec import CommParams
from quantcoop.config import UNSTABLE_TOL, WITNESS_MARGIN
from quantcoop.graph import Network, laplacian_split, spectrum
from quantcoop.models import ConfigError, ConvergenceError, NetworkError, WitnessInapplicable
from quantcoop.numerics import eigenvalues, kron, two_norm
from quantcoop.protocol import ControlLaw
from quantcoop.simulator import InitialConditions, SimConfig, SimTrace, simulate_primitive

WitnessKind = Literal["undetectable", "unstabilizable", "schur-growth"]
WITNESS_KINDS: tuple[str, ...] = ("undetectable", "unstabilizable", "schur-growth")


@dataclass
class WitnessReport:
    """Constructed initials, the predicted quantity and what the simulation showed."""

    kind: WitnessKind
    initial: InitialConditions
    steps: np.ndarray
    observed: np.ndarray
    """The monitored quantity along the simulated trajectory."""

    envelope: np.ndarray
    """Predicted lower bound (or exact prediction) for ``observed``."""

    holds: bool
    """True if the trajectory confirmed the prediction at every step."""

    details: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    trace: SimTrace | None = field(default=None, repr=False)

    @property
    def initial_norms(self) -> dict[str, float]:
        """Infinity norms of the stacked initials, the smallest admissible ball radii."""
        return {
            "x": float(np.max(np.abs(self.initial.x0))),
            "xhat": float(np.max(np.abs(self.initial.xhat0))),
            "uhat": float(np.max(np.abs(self.initial.uhat0))) if self.initial.uhat0.size else 0.0,
        }

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "holds": self.holds,
            "initial": {
                "x0": self.initial.x0.tolist(),
                "xhat0": self.initial.xhat0.tolist(),
                "uhat0": self.initial.uhat0.tolist(),
            },
            "initial_norms": self.initial_norms,
            "details": self.details,
            "warnings": list(self.warnings),
            "steps": self.steps.tolist(),
            "observed": self.observed.tolist(),
            "envelope": self.envelope.tolist(),
        }


def _require_consensus(law: ControlLaw) -> None:
    if law.variant != "consensus":
        raise ConfigError(f"witnesses are built for the consensus law, got {law.variant!r}")


def _run(plant, net, law, comm, initial, horizon, record_frames: bool = False) -> SimTrace:
    cfg = SimConfig(plant=plant, net=net, law=law, comm=comm, initial=initial, horizon=horizon)
    return simulate_primitive(cfg, record_frames=record_frames)


# ---------------------------------------------------------------------------
# Undetectable pair (A, C)
# ---------------------------------------------------------------------------


def unobservable_growth_vector(plant: LtiPlant) -> tuple[np.ndarray, complex]:
    """A real ``x0`` with ``C A^l x0 = 0`` for all l whose free motion does not decay.

    Returns the vector (infinity norm one) and the eigenvalue it was taken
    from.

    Raises
    ------
    WitnessInapplicable:
        If every unobservable mode is stable.
    """
    basis = orthogonal_complement(reachable_subspace(plant.a.T, plant.c.T), plant.n)
    if basis.shape[1] == 0:
        raise WitnessInapplicable("(A, C) is observable: the unobservable subspace is empty")
    basis = basis.real if np.isrealobj(plant.a) else basis
    reduced = basis.T @ plant.a @ basis
    vals, vecs = np.linalg.eig(reduced)
    order = np.argsort(-np.abs(vals), kind="stable")
    lam = vals[order[0]]
    if abs(lam) < 1.0 - UNSTABLE_TOL:
        raise WitnessInapplicable(
            f"every unobservable mode decays (largest |lambda| = {abs(lam):.6g}); (A, C) is detectable"
        )
    v = vecs[:, order[0]]
    part = v.real if np.linalg.norm(v.real) > 1e-8 else v.imag
    x0 = basis @ part
    x0 = x0 / np.max(np.abs(x0))
    if x0[np.argmax(np.abs(x0))] < 0:
        x0 = -x0
    return x0, complex(lam)


def undetectable_witness(
    plant: LtiPlant,
    net: Network,
    law: ControlLaw,
    comm: CommParams,
    horizon: int = 50,
) -> WitnessReport:
    """Hide a non-decaying unobservable state in agent 1.

    Every innovation is exactly zero, so every symbol is 0, every estimate
    stays at 0 and no control is ever applied; ``E(t)`` is the free motion
    ``A^t x0`` of agent 1.
    """
    _require_consensus(law)
    if check_detectability(plant).holds:
        raise WitnessInapplicable("(A, C) is detectable")
    x0, lam = unobservable_growth_vector(plant)
    size, n, m = net.n_agents, plant.n, plant.m
    states = np.zeros((size, n))
    states[0] = x0
    initial = InitialConditions(x0=states, xhat0=np.zeros((size, n)), uhat0=np.zeros((size, m)))
    trace = _run(plant, net, law, comm, initial, horizon, record_frames=True)

    free = np.empty((trace.steps.size, n))
    x = x0.copy()
    for row in range(trace.steps.size):
        free[row] = x
        x = plant.a @ x
    predicted = np.linalg.norm(free, axis=1)
    observed = np.linalg.norm(trace.e.reshape(trace.steps.size, -1), axis=1)
    symbols_zero = all(not any(f.s) and not any(f.s_u) for f in trace.frames)
    estimates_zero = bool(np.all(trace.x_hat == 0.0))
    controls_zero = bool(np.all(trace.u == 0.0))
    tracks = bool(np.all(observed >= 0.9 * predicted))
    return WitnessReport(
        kind="undetectable",
        initial=initial,
        steps=trace.steps,
        observed=observed,
        envelope=predicted,
        holds=symbols_zero and estimates_zero and controls_zero and tracks,
        details={
            "x0": x0.tolist(),
            "lambda": [lam.real, lam.imag],
            "symbols_all_zero": symbols_zero,
            "estimates_all_zero": estimates_zero,
            "controls_all_zero": controls_zero,
        },
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Unstabilizable pair (A, B)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaircaseSplit:
    """Orthogonal split of the state space into controllable and uncontrollable parts."""

    basis: np.ndarray
    """Orthogonal ``T1 = [V, W Q]``: controllable basis, then uncontrollable Schur basis."""

    controllable_dim: int
    unstable: np.ndarray
    """Columns spanning the uncontrollable unstable coordinates (``n x n_u4``)."""

    a_u4: np.ndarray
    """Dynamics of those coordinates: ``w^T x(t+1) = A_u4 w^T x(t)`` for any input."""


def staircase_decomposition(plant: LtiPlant) -> StaircaseSplit:
    """Controllable subspace by Krylov deflation, then an ordered Schur form of the rest.

    The controllable subspace V is A-invariant and contains range(B), so
    for the orthogonal complement W, ``W^T x`` evolves by ``W^T A W``
    independently of the input. Ordering the real Schur form of that block
    stable-first leaves the unstable modes in the trailing block ``A_u4``.
    """
    n = plant.n
    basis = reachable_subspace(plant.a, plant.b)
    ctrl_dim = basis.shape[1]
    complement = np.real(orthogonal_complement(basis, n))
    if complement.shape[1] == 0:
        return StaircaseSplit(basis=basis, controllable_dim=ctrl_dim, unstable=np.zeros((n, 0)), a_u4=np.zeros((0, 0)))
    a4 = complement.T @ plant.a @ complement
    t, q, sdim = sla.schur(a4, output="real", sort="iuc")
    return StaircaseSplit(
        basis=np.hstack([basis, complement @ q]),
        controllable_dim=ctrl_dim,
        unstable=complement @ q[:, sdim:],
        a_u4=t[sdim:, sdim:],
    )


def unstabilizable_witness(
    plant: LtiPlant,
    net: Network,
    law: ControlLaw,
    comm: CommParams,
    horizon: int = 50,
) -> WitnessReport:
    """Excite the uncontrollable unstable block in the first disagreement coordinate.

    ``X(0) = (Phi^-1 (x) I)(0, T1 1, 0, ...)``, ``Xhat(0) = 1``,
    ``Uhat(0) = 1``. The projection ``z_i(t) = w^T delta_i(t)`` obeys
    ``z_i(t+1) = A_u4 z_i(t)`` whatever the protocol does.
    """
    _require_consensus(law)
    if check_stabilizability(plant).holds:
        raise WitnessInapplicable("(A, B) is stabilizable")
    spec = spectrum(net)
    if not spec.lambda2_nonzero:
        raise WitnessInapplicable("the network has no spanning tree; the disagreement split is undefined")
    split = laplacian_split(net, spec)
    stair = staircase_decomposition(plant)
    if stair.unstable.shape[1] == 0:
        raise ConvergenceError("no uncontrollable unstable block found although the PBH test failed")
    size, n, m = net.n_agents, plant.n, plant.m
    coords = np.zeros(size * n, dtype=complex)
    coords[n : 2 * n] = stair.basis @ np.ones(n)
    x0 = (kron(split.phi_inv, np.eye(n)) @ coords).reshape(size, n)
    w = stair.unstable
    states = x0.real
    if np.max(np.abs((states - spec.pi @ states) @ w)) < 1e-9:
        states = x0.imag
    initial = InitialConditions(x0=states, xhat0=np.ones((size, n)), uhat0=np.ones((size, m)))
    trace = _run(plant, net, law, comm, initial, horizon)

    z = trace.delta @ w
    agent = int(np.argmax(np.linalg.norm(z[0], axis=1)))
    observed_z = z[:, agent, :]
    predicted_z = np.empty_like(observed_z)
    current = observed_z[0].copy()
    for row in range(trace.steps.size):
        predicted_z[row] = current
        current = stair.a_u4 @ current
    observed = np.linalg.norm(observed_z, axis=1)
    predicted = np.linalg.norm(predicted_z, axis=1)
    scale = np.maximum(1.0, np.max(np.abs(trace.x), axis=(1, 2)))
    gap = np.max(np.abs(observed_z - predicted_z), axis=1) / scale
    holds = bool(np.all(gap <= 1e-9) and observed[0] > 0 and np.all(observed > 0))
    return WitnessReport(
        kind="unstabilizable",
        initial=initial,
        steps=trace.steps,
        observed=observed,
        envelope=predicted,
        holds=holds,
        details={
            "agent": agent + 1,
            "controllable_dim": stair.controllable_dim,
            "a_u4": stair.a_u4.tolist(),
            "a_u4_eigenvalues": [[v.real, v.imag] for v in eigenvalues(stair.a_u4)],
            "max_relative_gap": float(gap.max()),
        },
        warnings=list(spec.warnings),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Unstable stacked recursion
# ---------------------------------------------------------------------------


def witness_constant(
    plant: LtiPlant,
    n_agents: int,
    comm: CommParams,
    lambda1: complex,
    varrho: float,
    rule: Literal["local", "global"] = "local",
) -> tuple[float, float]:
    """The inequality's right-hand side and the chosen ``a = WITNESS_MARGIN * rhs``.

    ``W = alpha/2`` and ``W_u = alpha_u/2``. The local rule divides by
    ``1 - varrho`` and uses the declared bound ``L_G`` (``||G||`` when the
    bound is infinite); the global rule divides by ``|lambda1 - gamma|`` and
    always uses ``||G||``. The state-noise term uses ``sqrt(max(n, p) N)``,
    which also covers the ``p N`` entries of ``Delta``.
    """
    w, w_u = comm.alpha / 2.0, comm.alpha_u / 2.0
    norm_g = two_norm(comm.observer_gain)
    dim = max(plant.n, plant.p)
    if rule == "local":
        denom = 1.0 - varrho
        l_g = comm.gain_bound if np.isfinite(comm.gain_bound) else norm_g
    elif rule == "global":
        denom = abs(lambda1 - comm.gamma)
        l_g = norm_g
    else:
        raise ConfigError(f"unknown constant rule {rule!r}")
    if denom <= 0:
        raise WitnessInapplicable(f"the {rule} constant rule needs a positive denominator, got {denom:.3g}")
    rhs = (
        4.0 * w_u * two_norm(plant.b) * np.sqrt(plant.m * n_agents) / denom
        + 4.0 * l_g * w * np.sqrt(dim * n_agents) / denom
    )
    return float(rhs), float(WITNESS_MARGIN * max(rhs, np.finfo(float).tiny))


def _dominant_left_vector(block: np.ndarray) -> tuple[complex, np.ndarray]:
    vals = eigenvalues(block)
    lam = max(vals, key=lambda v: (round(abs(v), 12), v.real, v.imag))
    target = np.conj(lam)
    tol = 1e-8 * max(1.0, abs(lam))
    try:
        t, q, sdim = sla.schur(block.conj().T, output="complex", sort=lambda x: abs(x - target) <= tol)
        if sdim == 0:
            raise ValueError("no eigenvalue selected")
        lam = complex(np.conj(t[0, 0]))
        vec = q[:, 0]
    except (ValueError, sla.LinAlgError):
        all_vals, left = sla.eig(block, left=True, right=False)
        idx = int(np.argmin(np.abs(all_vals - lam)))
        lam = complex(all_vals[idx])
        vec = left[:, idx] / np.linalg.norm(left[:, idx])
    return lam, vec


def schur_growth_witness(
    plant: LtiPlant,
    net: Network,
    law: ControlLaw,
    comm: CommParams,
    horizon: int = 30,
    varrho: float | None = None,
    constant_rule: Literal["local", "global"] = "local",
    seed: int = 0,
) -> WitnessReport:
    """Start on the dominant mode of ``A(K, G)`` with amplitude a.

    The left Schur vector ``l`` of a maximum-modulus eigenvalue lambda1
    gives the scalar ``Z1(t) = l^H (E(t), delta2(t))`` that grows like
    ``lambda1^t`` up to quantization noise bounded by ``(a/2)|lambda1|^t``.
    The initials are the real part of ``l`` mapped back to (E, delta)
    coordinates, scaled so that ``|Z1(0)| = a``, with ``X(0) = delta(0)``,
    ``Xhat(0) = X(0) - E(0)`` and ``Uhat(0) = -(L (x) K) Xhat(0)``.
    The observed ``|Z1(t)|`` is checked against ``(a/4)|lambda1|^t``.

    Raises
    ------
    WitnessInapplicable:
        If ``rho(A(K, G)) < 1``, the graph has no spanning tree, or
        ``gamma > varrho``.
    """
    _require_consensus(law)
    varrho = comm.gamma if varrho is None else varrho
    if not (comm.gamma <= varrho < 1.0):
        raise WitnessInapplicable(f"need gamma <= varrho < 1, got gamma = {comm.gamma}, varrho = {varrho}")
    try:
        split = laplacian_split(net)
    except NetworkError as exc:
        raise WitnessInapplicable(str(exc)) from exc
    k, g = law.k, comm.observer_gain
    block = closed_loop_block(plant, net.laplacian, split, k, g)
    lam, ell = _dominant_left_vector(block)
    if abs(lam) < 1.0:
        raise WitnessInapplicable(f"rho(A(K, G)) = {abs(lam):.6g} < 1: this (K, G) achieves both goals")

    size, n = net.n_agents, plant.n
    ell_e, ell_xi = ell[: size * n], ell[size * n :]
    ell_delta = kron(split.phi_bar.conj().T, np.eye(n)) @ ell_xi
    full = np.concatenate([ell_e, ell_delta])
    consensus = kron(np.eye(size) - np.outer(np.ones(size), spectrum(net).pi), np.eye(n))

    def realize(v: np.ndarray) -> tuple[np.ndarray, complex]:
        v = v.copy()
        v[size * n :] = consensus @ v[size * n :]
        return v, complex(np.vdot(full, v))

    rng = np.random.default_rng(seed)
    candidates = [full.real, full.imag] + [rng.standard_normal(full.size) for _ in range(8)]
    for raw in candidates:
        v, c = realize(raw)
        if abs(c) > 1e-8 * max(1.0, np.linalg.norm(v)):
            break
    else:
        raise ConvergenceError("could not realize a real initial condition on the dominant mode")

    rhs, a = witness_constant(plant, size, comm, lam, varrho, constant_rule)
    v = v * (a / abs(c))
    e0 = v[: size * n].reshape(size, n)
    x0 = v[size * n :].reshape(size, n)
    xhat0 = x0 - e0
    uhat0 = -(net.laplacian @ xhat0) @ k.T
    initial = InitialConditions(x0=x0, xhat0=xhat0, uhat0=uhat0)
    trace = _run(plant, net, law, comm, initial, horizon)

    rows = trace.steps.size
    stacked = np.hstack([trace.e.reshape(rows, -1), trace.delta.reshape(rows, -1)])
    z1 = stacked @ full.conj()
    observed = np.abs(z1)
    with np.errstate(over="ignore"):
        envelope = (a / 4.0) * np.abs(lam) ** trace.steps.astype(float)
    holds = bool(np.all(observed >= envelope))
    warnings = []
    if trace.saturations:
        warnings.append(
            f"{len(trace.saturations)} saturation events: quantization errors exceed alpha/2 and the envelope may not hold"
        )
    return WitnessReport(
        kind="schur-growth",
        initial=initial,
        steps=trace.steps,
        observed=observed,
        envelope=envelope,
        holds=holds,
        details={
            "a": a,
            "rhs": rhs,
            "constant_rule": constant_rule,
            "varrho": varrho,
            "lambda1": [lam.real, lam.imag],
            "rho_block": abs(lam),
            "z1_initial": abs(complex(z1[0])),
        },
        warnings=warnings,
        trace=trace,
    )
