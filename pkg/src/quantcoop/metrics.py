"""
Convergence metrics computed from a finished trace.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from quantcoop.config import DEFAULT_DECAY_WINDOW
from quantcoop.simulator import SimTrace

_LOG_FLOOR = 1e-300


@dataclass
class MetricsReport:
    """Per-step norms plus the scalar summaries reported for a run."""

    delta_norms: np.ndarray
    """``||delta(t)||`` for every step."""

    error_norms: np.ndarray
    """``||E_j(t)||`` per agent, every step."""

    channel_error_norms: np.ndarray
    """``||x_j(t) - xhat_ji(t)||`` per channel, every step."""

    reference_deviation: np.ndarray
    """``max_i ||x_i(t) - reference(t)||`` at stored steps."""

    decay_rate: float | None
    """Fitted geometric rate of ``||delta(t)||`` over the window, if enough points."""

    window: tuple[int, int]
    saturation_total: int
    """Saturation events over the whole run; symbols are first sent at t = 1."""
    saturation_by_kind: dict[str, int] = field(default_factory=dict)
    w_observed: float = 0.0
    w_u_observed: float = 0.0
    tracking_error: np.ndarray | None = None

    @property
    def final_delta(self) -> float:
        return float(self.delta_norms[-1])

    @property
    def final_error(self) -> float:
        return float(self.error_norms[-1].max()) if self.error_norms.size else 0.0

    def summary(self) -> dict:
        return {
            "final_delta_norm": self.final_delta,
            "final_max_error_norm": self.final_error,
            "max_channel_error_final": float(np.nanmax(self.channel_error_norms[-1]))
            if self.channel_error_norms.shape[1]
            else 0.0,
            "final_reference_deviation": float(self.reference_deviation[-1]),
            "decay_rate": self.decay_rate,
            "decay_window": list(self.window),
            "saturation_total": self.saturation_total,
            "saturation_by_kind": dict(self.saturation_by_kind),
            "w_observed": self.w_observed,
            "w_u_observed": self.w_u_observed,
        }


def fit_decay_rate(values: np.ndarray, window: tuple[int, int]) -> float | None:
    """``exp(slope)`` of a least-squares line through ``log(values[t])`` on the window."""
    start, stop = window
    stop = min(stop, values.size - 1)
    if stop - start < 1:
        return None
    ts = np.arange(start, stop + 1)
    seg = values[start : stop + 1]
    keep = seg > _LOG_FLOOR
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(ts[keep], np.log(seg[keep]), 1)
    return float(np.exp(slope))


def metrics(trace: SimTrace, window: tuple[int, int] = DEFAULT_DECAY_WINDOW) -> MetricsReport:
    """Summaries of a trace: norms, limit-trajectory deviation, decay fit and saturation census."""
    x = trace.x if trace.offsets is None else trace.x - trace.offsets
    deviation = np.linalg.norm(x - trace.reference[:, None, :], axis=2).max(axis=1)
    tracking = None
    if trace.leader_x is not None:
        tracking = np.linalg.norm(trace.x - trace.leader_x[:, None, :], axis=2).max(axis=1)
    kinds = Counter(ev.kind for ev in trace.saturations)
    return MetricsReport(
        delta_norms=trace.delta_norms,
        error_norms=trace.error_norms,
        channel_error_norms=trace.channel_error_norms,
        reference_deviation=deviation,
        decay_rate=fit_decay_rate(trace.delta_norms, window),
        window=window,
        saturation_total=len(trace.saturations),
        saturation_by_kind=dict(kinds),
        w_observed=trace.w_observed,
        w_u_observed=trace.w_u_observed,
        tracking_error=tracking,
    )
