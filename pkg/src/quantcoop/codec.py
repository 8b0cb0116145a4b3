"""
Quantized-observer encoder and decoder state machines.

An agent's encoder and every decoder listening to it run the same update
helpers in the same order, so their estimates stay bit-identical as long as
they see the same symbol stream. One step t >= 1 is:

    s(t)   = Q_{alpha,L}((y(t-1) - C x_hat) / gamma^(t-1))
    x_hat <- A x_hat + gamma^(t-1) G (alpha s) + B u_hat        (u_hat of t-1)
    s_u(t) = Q_{alpha_u,L_u}((u(t) - u_hat) / gamma^(t-1))
    u_hat <- u_hat + gamma^(t-1) (alpha_u s_u)

after which ``gamma_pow`` is multiplied by gamma and t advances.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from quantcoop.config import UNDERFLOW_GUARD
from quantcoop.models import DimensionError, ProtocolViolation
from quantcoop.quantizer import QuantizerSpec, bits_per_symbol, quantize_vector

if TYPE_CHECKING:
    from quantcoop.analysis import LtiPlant

_WIRE_INDEX_MAX = 32767


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommParams:
    """Communication protocol parameters ``(gamma, alpha, alpha_u, L, L_u, G)``.

    With ``precise=True`` both quantizers are replaced by the identity map and
    symbols carry the scaled innovations themselves.
    """

    gamma: float
    alpha: float
    alpha_u: float
    levels_y: int
    levels_u: int
    observer_gain: np.ndarray
    precise: bool = False
    gain_bound: float = float("inf")
    """Declared bound on ``||G||`` for the protocol set; ``inf`` when undeclared."""

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        QuantizerSpec(self.alpha, self.levels_y)
        QuantizerSpec(self.alpha_u, self.levels_u)
        g = np.atleast_2d(np.asarray(self.observer_gain, dtype=float))
        object.__setattr__(self, "observer_gain", g)

    @property
    def state_quantizer(self) -> QuantizerSpec:
        return QuantizerSpec(self.alpha, self.levels_y)

    @property
    def control_quantizer(self) -> QuantizerSpec:
        return QuantizerSpec(self.alpha_u, self.levels_u)

    def bits_per_step(self, p: int, m: int) -> int:
        """Bits one channel carries per step: ``p`` state and ``m`` control symbols."""
        return bits_per_symbol(self.state_quantizer) * p + bits_per_symbol(self.control_quantizer) * m

    def with_levels(self, levels_y: int, levels_u: int) -> CommParams:
        return CommParams(
            gamma=self.gamma,
            alpha=self.alpha,
            alpha_u=self.alpha_u,
            levels_y=levels_y,
            levels_u=levels_u,
            observer_gain=self.observer_gain,
            precise=self.precise,
            gain_bound=self.gain_bound,
        )


@dataclass
class CodecState:
    """Estimates ``(x_hat, u_hat)`` held by one encoder or one decoder."""

    x_hat: np.ndarray
    u_hat: np.ndarray
    t: int = 1
    """Index of the next step to process."""
    gamma_pow: float = 1.0
    """``gamma^(t-1)``, maintained by repeated multiplication."""
    awaiting_control: bool = field(default=False, repr=False)

    @classmethod
    def initial(cls, x_hat0: np.ndarray, u_hat0: np.ndarray) -> CodecState:
        return cls(
            x_hat=np.array(x_hat0, dtype=float).reshape(-1),
            u_hat=np.array(u_hat0, dtype=float).reshape(-1),
        )

    def copy(self) -> CodecState:
        return CodecState(
            x_hat=self.x_hat.copy(),
            u_hat=self.u_hat.copy(),
            t=self.t,
            gamma_pow=self.gamma_pow,
            awaiting_control=self.awaiting_control,
        )

    @property
    def underflowed(self) -> bool:
        return self.gamma_pow < UNDERFLOW_GUARD


@dataclass(frozen=True)
class SymbolFrame:
    """Everything one agent transmits at step t."""

    t: int
    sender: int
    s: tuple
    s_u: tuple


@dataclass(frozen=True)
class Emission:
    """What an encoder produced for one quantizer at one step."""

    symbols: np.ndarray
    """Integer indices, or raw scaled values in precise mode."""
    errors: np.ndarray
    """Scaled input minus reconstructed value (``Delta`` / ``Delta_u``)."""
    saturated: np.ndarray
    scaled_input: np.ndarray


# ---------------------------------------------------------------------------
# Shared arithmetic
# ---------------------------------------------------------------------------


def _quantize(spec: QuantizerSpec, scaled: np.ndarray, precise: bool) -> Emission:
    if precise:
        return Emission(
            symbols=scaled.copy(),
            errors=np.zeros_like(scaled),
            saturated=np.zeros(scaled.shape, dtype=bool),
            scaled_input=scaled,
        )
    out = quantize_vector(spec, scaled)
    return Emission(symbols=out.indices, errors=out.errors, saturated=out.saturated, scaled_input=scaled)


def symbol_values(step: float, symbols: np.ndarray, precise: bool) -> np.ndarray:
    """Reconstructed real values of transmitted symbols."""
    if precise:
        return np.asarray(symbols, dtype=float)
    return np.asarray(symbols, dtype=np.int64) * step


def _advance_estimate(state: CodecState, plant: LtiPlant, params: CommParams, s: np.ndarray) -> None:
    value = symbol_values(params.alpha, s, params.precise)
    state.x_hat = plant.a @ state.x_hat + state.gamma_pow * (params.observer_gain @ value) + plant.b @ state.u_hat


def _advance_control(state: CodecState, params: CommParams, s_u: np.ndarray) -> None:
    value = symbol_values(params.alpha_u, s_u, params.precise)
    state.u_hat = state.u_hat + state.gamma_pow * value


def _tick(state: CodecState, params: CommParams) -> None:
    state.gamma_pow = state.gamma_pow * params.gamma
    state.t += 1


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------


def encoder_emit_state_symbol(
    state: CodecState, plant: LtiPlant, params: CommParams, y_prev: np.ndarray
) -> Emission:
    """Quantize the scaled innovation of ``y(t-1)`` and update ``x_hat``.

    Saturation is reported on the returned emission, never raised.
    """
    if state.awaiting_control:
        raise ProtocolViolation(f"step {state.t}: control symbol of the previous step still pending")
    y_prev = np.asarray(y_prev, dtype=float).reshape(-1)
    if y_prev.size != plant.p:
        raise DimensionError(f"measurement length {y_prev.size}, expected {plant.p}")
    scaled = (y_prev - plant.c @ state.x_hat) / state.gamma_pow
    emission = _quantize(params.state_quantizer, scaled, params.precise)
    _advance_estimate(state, plant, params, emission.symbols)
    state.awaiting_control = True
    return emission


def encoder_emit_control_symbol(state: CodecState, params: CommParams, u_now: np.ndarray) -> Emission:
    """Quantize ``(u(t) - u_hat) / gamma^(t-1)``, update ``u_hat`` and close the step."""
    if not state.awaiting_control:
        raise ProtocolViolation(f"step {state.t}: state symbol must be emitted before the control symbol")
    u_now = np.asarray(u_now, dtype=float).reshape(-1)
    if u_now.size != state.u_hat.size:
        raise DimensionError(f"control length {u_now.size}, expected {state.u_hat.size}")
    scaled = (u_now - state.u_hat) / state.gamma_pow
    emission = _quantize(params.control_quantizer, scaled, params.precise)
    _advance_control(state, params, emission.symbols)
    _tick(state, params)
    state.awaiting_control = False
    return emission


# ---------------------------------------------------------------------------
# Decoder
# ---------------------------------------------------------------------------


def decoder_apply_state(state: CodecState, plant: LtiPlant, params: CommParams, t: int, s: np.ndarray) -> None:
    """First half of a decoder step: update ``x_hat`` from the state symbols of step t."""
    if state.awaiting_control:
        raise ProtocolViolation(f"step {state.t}: control symbols of the previous step still pending")
    if t != state.t:
        raise ProtocolViolation(f"decoder expected step {state.t}, got symbols for step {t}")
    s = np.asarray(s, dtype=float if params.precise else np.int64).reshape(-1)
    if s.size != plant.p:
        raise ProtocolViolation(f"{s.size} state symbols, expected {plant.p}")
    _advance_estimate(state, plant, params, s)
    state.awaiting_control = True


def decoder_apply_control(state: CodecState, params: CommParams, s_u: np.ndarray) -> None:
    """Second half of a decoder step: update ``u_hat`` and close the step."""
    if not state.awaiting_control:
        raise ProtocolViolation(f"step {state.t}: state symbols must be applied before control symbols")
    s_u = np.asarray(s_u, dtype=float if params.precise else np.int64).reshape(-1)
    if s_u.size != state.u_hat.size:
        raise ProtocolViolation(f"{s_u.size} control symbols, expected {state.u_hat.size}")
    _advance_control(state, params, s_u)
    _tick(state, params)
    state.awaiting_control = False


def decoder_apply(state: CodecState, plant: LtiPlant, params: CommParams, frame: SymbolFrame) -> CodecState:
    """Apply one frame; frames must arrive in strictly increasing t with no gaps.

    Raises
    ------
    ProtocolViolation:
        If ``frame.t`` is not the step this decoder expects or the symbol
        counts do not match the plant.
    """
    decoder_apply_state(state, plant, params, frame.t, frame.s)
    decoder_apply_control(state, params, frame.s_u)
    return state


def make_frame(t: int, sender: int, state_emission: Emission, control_emission: Emission) -> SymbolFrame:
    def _pack(symbols: np.ndarray) -> tuple:
        if symbols.dtype.kind in "iu":
            return tuple(int(v) for v in symbols)
        return tuple(float(v) for v in symbols)

    return SymbolFrame(t=t, sender=sender, s=_pack(state_emission.symbols), s_u=_pack(control_emission.symbols))


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------


def frame_format(p: int, m: int) -> struct.Struct:
    """``<QI`` header (step, sender) followed by p + m signed 16-bit indices."""
    return struct.Struct(f"<QI{p}h{m}h")


def _check_range(values: tuple, limit: int, what: str) -> None:
    for v in values:
        if not isinstance(v, (int, np.integer)):
            raise ProtocolViolation(f"{what} symbol {v!r} is not an integer index")
        if abs(v) > limit or abs(v) > _WIRE_INDEX_MAX:
            raise ProtocolViolation(f"{what} index {v} outside the declared range +-{limit}")


def encode_frame(frame: SymbolFrame, levels_y: int, levels_u: int) -> bytes:
    """Serialize a frame to its little-endian wire layout."""
    if not 0 <= frame.t < 1 << 64:
        raise ProtocolViolation(f"time step {frame.t} does not fit the unsigned 64-bit field")
    if not 0 <= frame.sender < 1 << 32:
        raise ProtocolViolation(f"sender id {frame.sender} does not fit the unsigned 32-bit field")
    _check_range(frame.s, levels_y, "state")
    _check_range(frame.s_u, levels_u, "control")
    fmt = frame_format(len(frame.s), len(frame.s_u))
    return fmt.pack(frame.t, frame.sender, *frame.s, *frame.s_u)


def decode_frame(buf: bytes, p: int, m: int, levels_y: int, levels_u: int) -> SymbolFrame:
    """Parse one frame; truncated buffers and out-of-range indices are rejected."""
    fmt = frame_format(p, m)
    if len(buf) < fmt.size:
        raise ProtocolViolation(f"truncated frame: {len(buf)} bytes, expected {fmt.size}")
    fields = fmt.unpack(buf[: fmt.size])
    frame = SymbolFrame(t=fields[0], sender=fields[1], s=tuple(fields[2 : 2 + p]), s_u=tuple(fields[2 + p :]))
    _check_range(frame.s, levels_y, "state")
    _check_range(frame.s_u, levels_u, "control")
    return frame


def frame_roundtrip(frame: SymbolFrame, levels_y: int, levels_u: int) -> SymbolFrame:
    """Encode then decode a frame."""
    data = encode_frame(frame, levels_y, levels_u)
    return decode_frame(data, len(frame.s), len(frame.s_u), levels_y, levels_u)
