"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric failures with 3, degenerate designs with 4.
"""


class FlowsenseError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FlowsenseError, ValueError):
    """Invalid or inconsistent configuration (bad field, impossible geometry)."""


class RegimeError(ConfigError):
    """Parameters leave the validity regime of the reduced model."""


class NumericError(FlowsenseError, RuntimeError):
    """Integration or evaluation failed (step underflow, NaN/Inf)."""


class DegenerateDesignError(FlowsenseError, RuntimeError):
    """Design analysis is degenerate (e.g. zero sensitivity everywhere)."""
