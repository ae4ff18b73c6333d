"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI lives next to the dispatcher in cli.py;
everything numeric raises from this module so callers can map uniformly.
"""


class TugLabError(Exception):
    """Base class for all package errors."""


class ParameterError(TugLabError, ValueError):
    """Invalid or out-of-range parameter (p <= 2, eps <= 0, bad config value)."""


class ConfigError(ParameterError):
    """Malformed experiment config: unknown key, missing key, bad literal."""


class StrategyViolationError(TugLabError):
    """A strategy returned a target outside the open step ball."""

    def __init__(self, player: str, distance: float, eps: float):
        self.player = player
        self.distance = distance
        self.eps = eps
        super().__init__(
            f"{player} proposed a move of length {distance:.6g} "
            f">= eps={eps:.6g}"
        )


class TruncationError(TugLabError):
    """An episode or walk exceeded its step budget. Carries the partial result."""

    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)


class EstimationFailureError(TugLabError):
    """A Monte Carlo estimate could not be formed (e.g. every episode truncated)."""


class NumericError(TugLabError):
    """Numeric evaluation failed outside the supported range (overflow etc.)."""


class AccuracyError(NumericError):
    """Requested accuracy is not reachable; message states the achievable bound."""

    def __init__(self, message: str, achievable: float | None = None):
        self.achievable = achievable
        super().__init__(message)


class NonConvergenceError(TugLabError):
    """Fixed-point iteration did not reach tolerance. Carries residual history."""

    def __init__(self, message: str, residuals=None):
        self.residuals = list(residuals or [])
        super().__init__(message)


class EnumerationSizeError(ParameterError):
    """Exact enumeration request beyond the supported size."""


class InternalInvariantError(TugLabError):
    """Bookkeeping invariant broke; indicates a bug, not a user error."""
