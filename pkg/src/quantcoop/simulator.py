"""
Closed-loop simulation of the quantized multi-agent system.

Two independent formulations are provided and used as mutual oracles:

- ``simulate_primitive`` runs every plant, encoder and per-channel decoder
  explicitly, following the tick schedule below;
- ``simulate_coupled`` advances the stacked observer error E, disagreement
  delta and control-estimate error H directly (consensus law only).

Tick t >= 1:
    y(t-1) recorded, plants step x(t) = A x(t-1) + B u(t-1),
    (1) every agent emits s_j(t), (2) every x_hat updates,
    (3) controls u_i(t) from the new estimates, (4) every agent emits
    s_uj(t), (5) every u_hat updates.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from quantcoop.analysis import LtiPlant
from quantcoop.codec import (
    CodecState,
    CommParams,
    Emission,
    SymbolFrame,
    _quantize,
    decoder_apply_control,
    decoder_apply_state,
    encoder_emit_control_symbol,
    encoder_emit_state_symbol,
    make_frame,
)
from quantcoop.config import ORACLE_RTOL, UNDERFLOW_GUARD
from quantcoop.graph import Network, spectrum
from quantcoop.models import ConfigError, DimensionError
from quantcoop.numerics import kron
from quantcoop.protocol import ControlLaw, control_input, precise_control_input, stacked_consensus_inputs

Mode = Literal["quantized", "precise", "coupled-oracle"]
MODES: tuple[str, ...] = ("quantized", "precise", "coupled-oracle")

LEADER = 0  # sender id of the tracking leader; followers are 1..N


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialConditions:
    """Initial states, estimates ``x_hat_j0`` and control estimates ``u_hat_j0``."""

    x0: np.ndarray
    xhat0: np.ndarray
    uhat0: np.ndarray
    leader_x0: np.ndarray | None = None
    leader_xhat0: np.ndarray | None = None


@dataclass(frozen=True)
class SimConfig:
    plant: LtiPlant
    net: Network
    law: ControlLaw
    comm: CommParams
    initial: InitialConditions
    horizon: int
    mode: Mode = "quantized"
    stride: int = 1

    def __post_init__(self) -> None:
        n_agents, n, m, p = self.net.n_agents, self.plant.n, self.plant.m, self.plant.p
        if self.mode not in MODES:
            raise ConfigError(f"unknown simulation mode {self.mode!r}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.horizon}")
        if self.stride < 1:
            raise ConfigError(f"stride must be positive, got {self.stride}")
        shapes = {
            "x0": (self.initial.x0, (n_agents, n)),
            "xhat0": (self.initial.xhat0, (n_agents, n)),
            "uhat0": (self.initial.uhat0, (n_agents, m)),
        }
        for name, (arr, shape) in shapes.items():
            if np.shape(arr) != shape:
                raise DimensionError(f"initial.{name}: shape {np.shape(arr)}, expected {shape}")
        if self.comm.observer_gain.shape != (n, p):
            raise DimensionError(f"G: shape {self.comm.observer_gain.shape}, expected {(n, p)}")
        for name, gain in (("K", self.law.k), ("K2", self.law.k2)):
            if gain is not None and gain.shape != (m, n):
                raise DimensionError(f"{name}: shape {gain.shape}, expected {(m, n)}")
        if self.law.offsets is not None and self.law.offsets.shape != (n_agents, n):
            raise DimensionError(f"offsets: shape {self.law.offsets.shape}, expected {(n_agents, n)}")
        if self.law.variant == "tracking":
            if np.shape(self.law.leader_weights) != (n_agents,):
                raise DimensionError(f"leader weights: length {np.size(self.law.leader_weights)}, expected {n_agents}")
            if self.initial.leader_x0 is None:
                raise ConfigError("tracking law needs a leader initial state")
        if self.comm.precise != (self.mode == "precise"):
            object.__setattr__(self, "comm", dataclasses.replace(self.comm, precise=self.mode == "precise"))

    @property
    def precise(self) -> bool:
        return self.mode == "precise"


# ---------------------------------------------------------------------------
# Trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SaturationEvent:
    t: int
    sender: int
    """1-based agent id, 0 for the leader."""
    kind: Literal["state", "control"]
    component: int
    """1-based component index."""
    magnitude: float
    """Absolute scaled quantizer input."""


@dataclass
class SimTrace:
    """Time-indexed record of one run.

    Per-step arrays are indexed by position in ``steps``; the ``*_norms``,
    ``sat_counts`` and quantization-error arrays always cover every step
    0..last regardless of the storage stride. ``quant_error[t]`` holds the
    error of the innovation quantized at tick t + 1 (NaN at the last step).
    """

    steps: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    u: np.ndarray
    u_hat: np.ndarray
    e: np.ndarray
    h: np.ndarray
    delta: np.ndarray
    reference: np.ndarray
    quant_error: np.ndarray
    quant_error_u: np.ndarray
    delta_norms: np.ndarray
    error_norms: np.ndarray
    channel_error_norms: np.ndarray
    sat_counts: np.ndarray
    channels: list[tuple[int, int]]
    pi: np.ndarray
    mode: str
    variant: str
    status: str = "completed"
    saturations: list[SaturationEvent] = field(default_factory=list)
    bits_per_channel: int | None = None
    frames: list[SymbolFrame] = field(default_factory=list)
    leader_x: np.ndarray | None = None
    x_bar: np.ndarray | None = None
    offsets: np.ndarray | None = None

    @property
    def last_step(self) -> int:
        return int(self.delta_norms.size - 1)

    @property
    def w_observed(self) -> float:
        """Largest state quantization error magnitude over the run."""
        vals = self.quant_error[np.isfinite(self.quant_error)]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    @property
    def w_u_observed(self) -> float:
        vals = self.quant_error_u[np.isfinite(self.quant_error_u)]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    @property
    def total_bits_per_step(self) -> int | None:
        if self.bits_per_channel is None:
            return None
        return self.bits_per_channel * len(self.channels)


class _TraceBuilder:
    """Dense per-step buffers, cut to the stride when the run ends."""

    def __init__(self, horizon: int, n_agents: int, n: int, m: int, p: int, n_channels: int):
        size = horizon + 1
        self.x = np.full((size, n_agents, n), np.nan)
        self.x_hat = np.full((size, n_agents, n), np.nan)
        self.u = np.full((size, n_agents, m), np.nan)
        self.u_hat = np.full((size, n_agents, m), np.nan)
        self.reference = np.full((size, n), np.nan)
        self.quant_error = np.full((size, n_agents, p), np.nan)
        self.quant_error_u = np.full((size, n_agents, m), np.nan)
        self.channel_error_norms = np.full((size, n_channels), np.nan)
        self.sat_counts = np.zeros(size, dtype=np.int64)
        self.leader_x: np.ndarray | None = None
        self.last = 0

    def record(self, t: int, x, x_hat, u, u_hat, reference) -> None:
        self.x[t], self.x_hat[t], self.u[t], self.u_hat[t] = x, x_hat, u, u_hat
        self.reference[t] = reference
        self.last = t

    def finish(self, pi: np.ndarray, offsets: np.ndarray | None, stride: int, **kwargs) -> SimTrace:
        last = self.last
        full = slice(0, last + 1)
        x, x_hat, u, u_hat = self.x[full], self.x_hat[full], self.u[full], self.u_hat[full]
        shifted = x - offsets if offsets is not None else x
        e = x - x_hat
        h = u - u_hat
        delta = shifted - np.einsum("i,tik->tk", pi, shifted)[:, None, :]
        steps = np.arange(0, last + 1, stride)
        if steps[-1] != last:
            steps = np.append(steps, last)
        leader_x = self.leader_x[full][steps] if self.leader_x is not None else None
        return SimTrace(
            steps=steps,
            x=x[steps],
            x_hat=x_hat[steps],
            u=u[steps],
            u_hat=u_hat[steps],
            e=e[steps],
            h=h[steps],
            delta=delta[steps],
            reference=self.reference[full][steps],
            quant_error=self.quant_error[full],
            quant_error_u=self.quant_error_u[full],
            delta_norms=np.linalg.norm(delta.reshape(last + 1, -1), axis=1),
            error_norms=np.linalg.norm(e, axis=2),
            channel_error_norms=self.channel_error_norms[full],
            sat_counts=self.sat_counts[full],
            pi=pi,
            leader_x=leader_x,
            offsets=offsets,
            **kwargs,
        )


def _saturation_events(t: int, sender: int, kind: str, emission: Emission) -> list[SaturationEvent]:
    return [
        SaturationEvent(t=t, sender=sender, kind=kind, component=int(c) + 1, magnitude=float(abs(emission.scaled_input[c])))
        for c in np.flatnonzero(emission.saturated)
    ]


def _reference_matrix(cfg: SimConfig) -> np.ndarray:
    if cfg.law.variant == "mixed":
        return cfg.plant.a + cfg.plant.b @ cfg.law.k
    return cfg.plant.a


# ---------------------------------------------------------------------------
# Primitive formulation
# ---------------------------------------------------------------------------


def simulate_primitive(cfg: SimConfig, record_frames: bool = False) -> SimTrace:
    """Run plants, encoders and one decoder per channel for ``cfg.horizon`` steps.

    Saturation and divergence are recorded on the trace; the run ends early
    with status ``"scaling-underflow"`` once ``gamma^(t-1)`` drops below the
    underflow guard.
    """
    plant, net, law, comm = cfg.plant, cfg.net, cfg.law, cfg.comm
    n_agents, n, m, p = net.n_agents, plant.n, plant.m, plant.p
    adjacency = net.adjacency
    channels = net.channels
    pi = spectrum(net).pi
    tracking = law.variant == "tracking"
    ic = cfg.initial

    x = np.array(ic.x0, dtype=float)
    encoders = [CodecState.initial(ic.xhat0[j], ic.uhat0[j]) for j in range(n_agents)]
    decoders = {(j, i): CodecState.initial(ic.xhat0[j], ic.uhat0[j]) for j, i in channels}

    followers: list[int] = []
    leader_x = leader_enc = None
    leader_dec: dict[int, CodecState] = {}
    if tracking:
        followers = [i for i in range(n_agents) if law.leader_weights[i] > 0]
        leader_x = np.array(ic.leader_x0, dtype=float).reshape(-1)
        lead_hat0 = np.zeros(n) if ic.leader_xhat0 is None else np.asarray(ic.leader_xhat0, dtype=float)
        leader_enc = CodecState.initial(lead_hat0, np.zeros(m))
        leader_dec = {i: CodecState.initial(lead_hat0, np.zeros(m)) for i in followers}

    def controls() -> np.ndarray:
        out = np.empty((n_agents, m))
        for i in range(n_agents):
            neighbors = {j: decoders[(j, i)].x_hat for j in net.in_neighbors(i)}
            lead = leader_dec[i].x_hat if i in leader_dec else None
            out[i] = control_input(law, i, encoders[i].x_hat, neighbors, adjacency[i], own_state=x[i], leader_estimate=lead)
        return out

    u = controls()
    if cfg.precise:
        for j in range(n_agents):
            encoders[j].u_hat = u[j].copy()
        for (j, _), dec in decoders.items():
            dec.u_hat = u[j].copy()

    ref_matrix = _reference_matrix(cfg)
    offsets = law.offsets if law.variant == "formation" else None
    shifted0 = x - offsets if offsets is not None else x
    reference = pi @ shifted0

    buf = _TraceBuilder(cfg.horizon, n_agents, n, m, p, len(channels))
    if tracking:
        buf.leader_x = np.full((cfg.horizon + 1, n), np.nan)
        buf.leader_x[0] = leader_x
        reference = leader_x.copy()

    def channel_errors() -> np.ndarray:
        return np.array([np.linalg.norm(x[j] - decoders[(j, i)].x_hat) for j, i in channels])

    buf.record(0, x, np.array([e.x_hat for e in encoders]), u, np.array([e.u_hat for e in encoders]), reference)
    buf.channel_error_norms[0] = channel_errors()

    status = "completed"
    saturations: list[SaturationEvent] = []
    frames: list[SymbolFrame] = []

    for t in range(1, cfg.horizon + 1):
        if encoders[0].gamma_pow < UNDERFLOW_GUARD:
            status = "scaling-underflow"
            break
        y_prev = x @ plant.c.T
        x = x @ plant.a.T + u @ plant.b.T
        if tracking:
            lead_y = plant.c @ leader_x
            leader_x = plant.a @ leader_x

        # (1)-(2) state symbols and estimate updates
        state_em = [encoder_emit_state_symbol(encoders[j], plant, comm, y_prev[j]) for j in range(n_agents)]
        for j, i in channels:
            decoder_apply_state(decoders[(j, i)], plant, comm, t, state_em[j].symbols)
        if tracking:
            lead_em = encoder_emit_state_symbol(leader_enc, plant, comm, lead_y)
            for i in followers:
                decoder_apply_state(leader_dec[i], plant, comm, t, lead_em.symbols)

        # (3) controls from the updated estimates
        u = controls()

        # (4)-(5) control symbols and control-estimate updates
        ctrl_em = [encoder_emit_control_symbol(encoders[j], comm, u[j]) for j in range(n_agents)]
        for j, i in channels:
            decoder_apply_control(decoders[(j, i)], comm, ctrl_em[j].symbols)
        if tracking:
            lead_ctrl = encoder_emit_control_symbol(leader_enc, comm, np.zeros(m))
            for i in followers:
                decoder_apply_control(leader_dec[i], comm, lead_ctrl.symbols)

        for j in range(n_agents):
            saturations += _saturation_events(t, j + 1, "state", state_em[j])
            saturations += _saturation_events(t, j + 1, "control", ctrl_em[j])
            buf.quant_error[t - 1, j] = state_em[j].errors
            buf.quant_error_u[t - 1, j] = ctrl_em[j].errors
            if record_frames:
                frames.append(make_frame(t, j + 1, state_em[j], ctrl_em[j]))
        step_sat = sum(int(em.saturated.sum()) for em in state_em + ctrl_em)
        if tracking:
            saturations += _saturation_events(t, LEADER, "state", lead_em)
            step_sat += int(lead_em.saturated.sum())
            if record_frames:
                frames.append(make_frame(t, LEADER, lead_em, lead_ctrl))
            reference = leader_x.copy()
            buf.leader_x[t] = leader_x
        else:
            reference = ref_matrix @ reference
        buf.sat_counts[t] = step_sat
        buf.record(t, x, np.array([e.x_hat for e in encoders]), u, np.array([e.u_hat for e in encoders]), reference)
        buf.channel_error_norms[t] = channel_errors()

    return buf.finish(
        pi,
        offsets,
        cfg.stride,
        channels=channels,
        mode=cfg.mode,
        variant=law.variant,
        status=status,
        saturations=saturations,
        bits_per_channel=None if cfg.precise else comm.bits_per_step(p, m),
        frames=frames,
    )


# ---------------------------------------------------------------------------
# Coupled formulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoupledOperators:
    """Stacked matrices of the (E, delta, H) recursion."""

    observer: np.ndarray      # I (x) (A - G C)
    input_b: np.ndarray       # I (x) B
    input_g: np.ndarray       # I (x) G
    output_c: np.ndarray      # I (x) C
    consensus: np.ndarray     # I (x) A - L (x) B K
    coupling: np.ndarray      # L (x) B K
    drift: np.ndarray         # I (x) A
    f_delta: np.ndarray       # L (x) K - L (x) K A + L^2 (x) K B K
    f_error: np.ndarray       # L (x) K (A - G C) - L^2 (x) K B K - L (x) K
    f_hold: np.ndarray        # I + L (x) K B
    f_quant: np.ndarray       # L (x) K G
    feedback: np.ndarray      # L (x) K


def coupled_operators(plant: LtiPlant, laplacian: np.ndarray, k: np.ndarray, g: np.ndarray) -> CoupledOperators:
    n_agents = laplacian.shape[0]
    eye = np.eye(n_agents)
    a, b, c = plant.a, plant.b, plant.c
    lap2 = laplacian @ laplacian
    kbk = k @ b @ k
    return CoupledOperators(
        observer=kron(eye, a - g @ c),
        input_b=kron(eye, b),
        input_g=kron(eye, g),
        output_c=kron(eye, c),
        consensus=kron(eye, a) - kron(laplacian, b @ k),
        coupling=kron(laplacian, b @ k),
        drift=kron(eye, a),
        f_delta=kron(laplacian, k) - kron(laplacian, k @ a) + kron(lap2, kbk),
        f_error=kron(laplacian, k @ (a - g @ c)) - kron(lap2, kbk) - kron(laplacian, k),
        f_hold=np.eye(n_agents * plant.m) + kron(laplacian, k @ b),
        f_quant=kron(laplacian, k @ g),
        feedback=kron(laplacian, k),
    )


def simulate_coupled(cfg: SimConfig) -> SimTrace:
    """Advance ``(E, delta, H)`` directly and rebuild X from ``delta + Xbar``.

    Uses the same quantizers on the same scaled innovations as the primitive
    run:

        E(t+1)     = (I (x) (A-GC)) E + (I (x) B) H + gamma^t (I (x) G) Delta(t)
        delta(t+1) = (I (x) A - L (x) BK) delta + (L (x) BK) E
        F(t)       = (f_delta delta + f_error E + f_hold H) / gamma^t + f_quant Delta(t)
        H(t+1)     = gamma^t (F(t) - Q(F(t)))
        Xbar(t+1)  = (I (x) A) Xbar

    Raises
    ------
    ConfigError:
        For any law other than consensus.
    """
    plant, net, law, comm = cfg.plant, cfg.net, cfg.law, cfg.comm
    if law.variant != "consensus":
        raise ConfigError(f"the coupled formulation covers the consensus law only, got {law.variant!r}")
    n_agents, n, m, p = net.n_agents, plant.n, plant.m, plant.p
    ops = coupled_operators(plant, net.laplacian, law.k, comm.observer_gain)
    pi = spectrum(net).pi
    ic = cfg.initial

    x0 = np.asarray(ic.x0, dtype=float).reshape(-1)
    xhat0 = np.asarray(ic.xhat0, dtype=float).reshape(-1)
    u0 = ops.feedback @ -xhat0
    uhat0 = u0.copy() if cfg.precise else np.asarray(ic.uhat0, dtype=float).reshape(-1)
    averaging = kron(np.outer(np.ones(n_agents), pi), np.eye(n))
    x_bar = averaging @ x0
    delta = x0 - x_bar
    err = x0 - xhat0
    hold = u0 - uhat0
    gamma_pow = 1.0

    channels = net.channels
    buf = _TraceBuilder(cfg.horizon, n_agents, n, m, p, len(channels))
    x_bars = np.full((cfg.horizon + 1, n_agents, n), np.nan)

    def record(t: int) -> None:
        x = delta + x_bar
        x_hat = x - err
        u = -(ops.feedback @ x_hat)
        x_grid = x.reshape(n_agents, n)
        buf.record(t, x_grid, x_hat.reshape(n_agents, n), u.reshape(n_agents, m), (u - hold).reshape(n_agents, m), pi @ x_grid)
        e_grid = err.reshape(n_agents, n)
        buf.channel_error_norms[t] = [np.linalg.norm(e_grid[j]) for j, _ in channels]
        x_bars[t] = x_bar.reshape(n_agents, n)

    record(0)
    status = "completed"
    saturations: list[SaturationEvent] = []
    for t in range(cfg.horizon):
        if gamma_pow < UNDERFLOW_GUARD:
            status = "scaling-underflow"
            break
        innov = (ops.output_c @ err) / gamma_pow
        state_em = [_quantize(comm.state_quantizer, innov[j * p : (j + 1) * p], comm.precise) for j in range(n_agents)]
        quant = np.concatenate([em.errors for em in state_em])
        err_next = ops.observer @ err + ops.input_b @ hold + gamma_pow * (ops.input_g @ quant)
        delta_next = ops.consensus @ delta + ops.coupling @ err
        f = (ops.f_delta @ delta + ops.f_error @ err + ops.f_hold @ hold) / gamma_pow + ops.f_quant @ quant
        ctrl_em = [_quantize(comm.control_quantizer, f[j * m : (j + 1) * m], comm.precise) for j in range(n_agents)]
        quant_u = np.concatenate([em.errors for em in ctrl_em])
        hold = gamma_pow * quant_u
        err, delta = err_next, delta_next
        x_bar = ops.drift @ x_bar
        gamma_pow = gamma_pow * comm.gamma

        for j in range(n_agents):
            saturations += _saturation_events(t + 1, j + 1, "state", state_em[j])
            saturations += _saturation_events(t + 1, j + 1, "control", ctrl_em[j])
            buf.quant_error[t, j] = state_em[j].errors
            buf.quant_error_u[t, j] = ctrl_em[j].errors
        buf.sat_counts[t + 1] = sum(int(em.saturated.sum()) for em in state_em + ctrl_em)
        record(t + 1)

    trace = buf.finish(
        pi,
        None,
        cfg.stride,
        channels=channels,
        mode="coupled",
        variant=law.variant,
        status=status,
        saturations=saturations,
        bits_per_channel=None if cfg.precise else comm.bits_per_step(p, m),
    )
    trace.x_bar = x_bars[: buf.last + 1][trace.steps]
    return trace


# ---------------------------------------------------------------------------
# Unquantized state-feedback baseline
# ---------------------------------------------------------------------------


def simulate_precise_state(cfg: SimConfig) -> SimTrace:
    """Baseline with ``u_i = K sum_j a_ij (x_j - x_i)`` on true states; no codec."""
    plant, net = cfg.plant, cfg.net
    n_agents, n, m, p = net.n_agents, plant.n, plant.m, plant.p
    k = cfg.law.distributed_gain
    pi = spectrum(net).pi
    x = np.array(cfg.initial.x0, dtype=float)
    buf = _TraceBuilder(cfg.horizon, n_agents, n, m, p, len(net.channels))
    reference = pi @ x

    def controls() -> np.ndarray:
        return np.array([precise_control_input(k, i, x, net.adjacency) for i in range(n_agents)])

    u = controls()
    buf.record(0, x, x, u, u, reference)
    buf.channel_error_norms[0] = 0.0
    for t in range(1, cfg.horizon + 1):
        x = x @ plant.a.T + u @ plant.b.T
        u = controls()
        reference = plant.a @ reference
        buf.record(t, x, x, u, u, reference)
        buf.channel_error_norms[t] = 0.0
        buf.quant_error[t - 1] = 0.0
        buf.quant_error_u[t - 1] = 0.0
    return buf.finish(pi, None, cfg.stride, channels=net.channels, mode="state-feedback", variant="consensus")


# ---------------------------------------------------------------------------
# Oracle comparison
# ---------------------------------------------------------------------------


@dataclass
class OracleReport:
    agree: bool
    max_diff: dict[str, float]
    first_mismatch: int | None = None
    """Earliest stored step where some quantity exceeds tolerance."""


def compare_traces(a: SimTrace, b: SimTrace, rtol: float = ORACLE_RTOL) -> OracleReport:
    """Compare E, delta and H step by step.

    The tolerance for each quantity is ``rtol * max(1, peak magnitude)`` of
    the first trace.
    """
    if a.steps.shape != b.steps.shape or not np.array_equal(a.steps, b.steps):
        return OracleReport(agree=False, max_diff={"steps": float("inf")}, first_mismatch=0)
    max_diff: dict[str, float] = {}
    first: int | None = None
    for name in ("e", "delta", "h", "x"):
        lhs, rhs = getattr(a, name), getattr(b, name)
        diff = np.abs(lhs - rhs).reshape(lhs.shape[0], -1).max(axis=1)
        max_diff[name] = float(diff.max()) if diff.size else 0.0
        tol = rtol * max(1.0, float(np.max(np.abs(lhs))) if lhs.size else 1.0)
        bad = np.flatnonzero(diff > tol)
        if bad.size:
            step = int(a.steps[bad[0]])
            first = step if first is None else min(first, step)
    return OracleReport(agree=first is None, max_diff=max_diff, first_mismatch=first)


# ---------------------------------------------------------------------------
# Initial-condition sampling
# ---------------------------------------------------------------------------


def sample_uniform_initials(
    rng: np.random.Generator,
    n_agents: int,
    n: int,
    m: int,
    low: float = 0.0,
    high: float = 5.0,
    with_leader: bool = False,
) -> InitialConditions:
    """States uniform on ``[low, high]^n``; estimates and control estimates start at zero."""
    x0 = rng.uniform(low, high, size=(n_agents, n))
    leader = rng.uniform(low, high, size=n) if with_leader else None
    return InitialConditions(x0=x0, xhat0=np.zeros((n_agents, n)), uhat0=np.zeros((n_agents, m)), leader_x0=leader)


def sample_ball_initials(
    rng: np.random.Generator,
    n_agents: int,
    n: int,
    m: int,
    c_x: float,
    c_xhat: float,
    c_uhat: float,
) -> InitialConditions:
    """Uniform draws strictly inside the infinity-norm balls of radii ``c_x, c_xhat, c_uhat``."""
    shrink = 1.0 - 1e-9
    return InitialConditions(
        x0=rng.uniform(-c_x, c_x, size=(n_agents, n)) * shrink,
        xhat0=rng.uniform(-c_xhat, c_xhat, size=(n_agents, n)) * shrink,
        uhat0=rng.uniform(-c_uhat, c_uhat, size=(n_agents, m)) * shrink,
    )


def stacked_inputs_check(cfg: SimConfig, trace: SimTrace) -> float:
    """Largest gap between recorded controls and ``-(L (x) K) Xhat`` (consensus law)."""
    worst = 0.0
    for row in range(trace.steps.size):
        expected = stacked_consensus_inputs(cfg.net.laplacian, cfg.law.k, trace.x_hat[row])
        worst = max(worst, float(np.max(np.abs(expected - trace.u[row]))))
    return worst
