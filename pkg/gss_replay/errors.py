"""Exception types raised by gss-replay.

Each error also derives from the closest builtin so callers can catch
either the package type or the plain ValueError/RuntimeError.
"""
from typing import Iterable, Optional, Sequence


class GssReplayError(Exception):
    """Base class for all package errors."""


class ShapeError(GssReplayError, ValueError):
    """An array does not have the dimension the operation requires."""


class LabelError(GssReplayError, ValueError):
    """A class id falls outside [0, K)."""


class EmptyInputError(GssReplayError, ValueError):
    """An operation that needs at least one item received none."""


class DegenerateVectorError(GssReplayError, ValueError):
    """A vector's norm is too small to define a direction."""


class DegenerateSetError(GssReplayError, ValueError):
    """A vector set spans no direction at all (rank 0)."""


class InsufficientCandidatesError(GssReplayError, ValueError):
    """Fewer candidates than slots to fill."""


class DataError(GssReplayError, ValueError):
    """A dataset cannot supply what a stream constructor asked for."""


class NonFiniteGradientError(GssReplayError, FloatingPointError):
    """A gradient contains NaN or Inf entries."""


class ParseError(GssReplayError, ValueError):
    """Malformed dataset file. ``offset`` is a byte offset (IDX) or row number (CSV)."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ConfigError(GssReplayError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, valid_options: Optional[Iterable[str]] = None):
        self.valid_options = sorted(valid_options) if valid_options is not None else []
        if self.valid_options:
            message = f"{message}. Available: {', '.join(self.valid_options)}"
        super().__init__(message)


class ConvergenceError(GssReplayError, RuntimeError):
    """An iterative solver stopped at its iteration cap."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class ExperimentError(GssReplayError, RuntimeError):
    """One or more (seed, strategy) runs of an experiment failed."""

    def __init__(self, failures: Sequence[tuple[int, str, str]]):
        self.failures = list(failures)
        detail = "; ".join(
            f"seed={seed} strategy={strategy}: {message}"
            for seed, strategy, message in self.failures
        )
        super().__init__(f"{len(self.failures)} run(s) failed: {detail}")
