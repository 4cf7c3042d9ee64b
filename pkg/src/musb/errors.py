"""Exception types shared across the package."""

from __future__ import annotations


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its requested accuracy."""


class QuadratureError(ConvergenceError):
    """Level doubling exhausted the refinement ceiling.

    The last two estimates are kept so callers can judge how far off the
    integral still is.
    """

    def __init__(self, message: str, estimates: tuple[complex, complex]):
        super().__init__(message)
        self.estimates = estimates


class TruncationError(ConvergenceError):
    """A truncated series left a tail larger than the requested tolerance."""
