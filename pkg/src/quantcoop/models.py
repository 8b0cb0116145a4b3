"""
Error types and command result data classes.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class QuantCoopError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(QuantCoopError):
    """Raised when an experiment description is malformed or inconsistent."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class DimensionError(ConfigError, ValueError):
    """Raised when matrix or vector shapes do not conform."""


class NetworkError(ConfigError):
    """Raised for invalid communication topologies (self loops, duplicates, ...)."""


class InfeasibleError(QuantCoopError):
    """Raised when no admissible protocol parameters can be produced."""


class OracleMismatchError(QuantCoopError):
    """Raised when the two simulation formulations disagree."""


class ConvergenceError(QuantCoopError):
    """Raised when a dense eigenvalue or Schur routine fails."""


class ProtocolViolation(QuantCoopError):
    """Raised for out-of-order, missing or malformed symbol frames."""


class WitnessInapplicable(QuantCoopError):
    """Raised when the assumption a witness is meant to defeat actually holds."""


# ---------------------------------------------------------------------------
# Command results
# ---------------------------------------------------------------------------


@dataclass
class ValidationResult:
    """Result of validating an experiment description."""

    success: bool
    """True if no errors were found."""

    errors: list[str] = field(default_factory=list)
    """``path: message`` diagnostics in document order."""

    warnings: list[str] = field(default_factory=list)
    """Accepted but suspicious settings."""

    @property
    def error_count(self) -> int:
        return len(self.errors)


@dataclass
class AnalysisReport:
    """Result of checking the standing assumptions for one configuration."""

    detectable: bool
    """True if (A, C) passes the PBH detectability test."""

    stabilizable: bool
    """True if (A, B) passes the PBH stabilizability test."""

    eigenvalues: list[complex]
    """Laplacian spectrum, ascending by real part."""

    pi: list[float]
    """Left zero-eigenvector of the Laplacian, normalised to sum one."""

    spanning_tree: bool
    """True if some agent reaches every other agent."""

    a1: dict[str, Any] | None = None
    """Simultaneous stabilizability check for the configured gain, if any."""

    a1_prime: dict[str, Any] | None = None
    """Product-of-unstable-eigenvalues check, single-input plants only."""

    observer: dict[str, Any] | None = None
    """``rho(A - G C)`` for the configured observer gain, if any."""

    warnings: list[str] = field(default_factory=list)
    """Non-fatal remarks (ambiguous pi, extension laws, ...)."""


@dataclass
class SimulationOutcome:
    """Result of one simulation command."""

    success: bool
    """True if the run completed and every requested check passed."""

    status: str
    """Run status reported by the simulator."""

    metrics: dict[str, Any] = field(default_factory=dict)
    """Summary metrics of the primitive run."""

    files: list[Path] = field(default_factory=list)
    """Every file written for this run."""

    oracle_max_diff: float | None = None
    """Largest primitive/coupled discrepancy, when the oracle ran."""


@dataclass
class ReproductionOutcome:
    """Result of rerunning the bundled worked example over one or more seeds."""

    passed: int
    """Number of seeds that met every acceptance threshold."""

    total: int
    """Number of seeds attempted."""

    rows: list[dict[str, Any]] = field(default_factory=list)
    """Per-seed summary: seed, final errors, decay rate, saturations, verdict."""

    files: list[Path] = field(default_factory=list)
    """Files written for the first seed."""

    @property
    def success(self) -> bool:
        return self.total > 0 and self.passed == self.total
