"""Semantic exception hierarchy for splitlab.

Public functions raise these instead of bare ValueError/RuntimeError so that
the CLI can map failure classes onto exit codes (config -> 2, numerics -> 3).
"""


class SplitLabError(Exception):
    """Base error for this package."""


class InputError(SplitLabError, ValueError):
    """Arguments violate a contract: wrong type, shape, or non-finite value."""


class DomainError(InputError):
    """A numeric argument lies outside its mathematical domain."""


class NumericalError(SplitLabError, ArithmeticError):
    """A numerical procedure failed: bracketing, overflow, NaN in evaluation."""


class ConfigError(SplitLabError, ValueError):
    """Run configuration is malformed; message carries the offending field path."""


class TrivialTestError(SplitLabError):
    """Calibration hit the degenerate regime where the likelihood ratio is constant."""
