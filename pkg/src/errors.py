"""Exceptions raised by the solver modules."""


class SolverError(Exception):
    """Base class for every error raised by lagrange-bnb."""


class DimensionError(SolverError, ValueError):
    """Vector or matrix shapes do not agree with the instance."""


class InvalidProblemError(SolverError, ValueError):
    """Malformed input data (NaN, infinities, negative multipliers, bad parameters)."""


class OracleCapacityError(SolverError):
    """The exact UBQP oracle was asked to enumerate too many variables."""


class InfeasibleNodeError(SolverError):
    """A subproblem was proven to have no feasible point."""


class InfeasibleStartError(SolverError, ValueError):
    """Local search was started from a point that violates a constraint."""


class ConfigurationError(SolverError):
    """Unknown strategy, oracle or option value."""
