"""
Finite-level uniform quantizer ``Q_{p,M}``.

Bins are half-open, ``[i*p - p/2, i*p + p/2)`` for i = 0..M-1, inputs at or
above ``M*p - p/2`` clamp to M, and negative inputs below ``-p/2`` follow
``Q(y) = -Q(-y)``. Outputs are carried as integer indices; the reconstructed
value is always ``index * p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from quantcoop.config import QUANT_BOUNDARY_TOL


@dataclass(frozen=True)
class QuantizerSpec:
    """Step size and one-sided level count."""

    step: float
    levels: int

    def __post_init__(self) -> None:
        if not (0.0 < self.step <= 1.0):
            raise ValueError(f"quantizer step must lie in (0, 1], got {self.step}")
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError(f"quantizer levels must be a positive integer, got {self.levels}")

    @property
    def alphabet_size(self) -> int:
        return 2 * self.levels + 1

    @property
    def range_limit(self) -> float:
        """Largest input magnitude whose error stays within ``step/2``."""
        return self.levels * self.step + self.step / 2


@dataclass(frozen=True)
class QuantOutcome:
    index: int
    value: float
    error: float
    saturated: bool


@dataclass(frozen=True)
class QuantVector:
    """Componentwise outcome for a vector input."""

    indices: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    saturated: np.ndarray

    @property
    def any_saturated(self) -> bool:
        return bool(self.saturated.any())


def _snapped_floor(s: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``floor(s)``, except that values within the guard of an integer snap to it."""
    nearest = np.rint(s)
    guard = QUANT_BOUNDARY_TOL * np.maximum(1.0, np.abs(r))
    return np.where(np.abs(s - nearest) <= guard, nearest, np.floor(s))


def quantize_indices(spec: QuantizerSpec, y: np.ndarray) -> np.ndarray:
    """Quantizer indices for an array of finite inputs."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("quantizer input must be finite")
    r = y / spec.step
    upper = _snapped_floor(r + 0.5, r)
    lower = _snapped_floor(-r + 0.5, r)
    idx = np.where(upper >= 0, np.minimum(spec.levels, upper), -np.minimum(spec.levels, lower))
    return idx.astype(np.int64)


def quantize_vector(spec: QuantizerSpec, y: np.ndarray) -> QuantVector:
    """Componentwise quantization with errors and saturation flags."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    idx = quantize_indices(spec, y)
    values = idx * spec.step
    return QuantVector(
        indices=idx,
        values=values,
        errors=y - values,
        saturated=np.abs(y) > spec.range_limit,
    )


def quantize(spec: QuantizerSpec, y: float) -> QuantOutcome:
    """Quantize a single finite scalar.

    Examples
    --------
    >>> quantize(QuantizerSpec(1.0, 20), 0.5).index
    1
    >>> quantize(QuantizerSpec(1.0, 20), -0.5).index
    0
    >>> quantize(QuantizerSpec(1.0, 20), 25.0).saturated
    True
    """
    out = quantize_vector(spec, np.array([y]))
    return QuantOutcome(
        index=int(out.indices[0]),
        value=float(out.values[0]),
        error=float(out.errors[0]),
        saturated=bool(out.saturated[0]),
    )


def bits_per_symbol(spec: QuantizerSpec) -> int:
    """``ceil(log2(2M + 1))`` bits to carry one index.

    Examples
    --------
    >>> bits_per_symbol(QuantizerSpec(1.0, 20))
    6
    """
    return (2 * spec.levels).bit_length()
