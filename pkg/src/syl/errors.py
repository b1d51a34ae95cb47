"""Exception and warning classes.

Every error carries the process exit code the CLI maps it to:
2 for configuration/input errors, 3 for convergence or diagnostics
failures, 4 for mathematical inconsistency.
"""


class SylError(Exception):
    exit_code = 1


class ConfigurationError(SylError, ValueError):
    """Invalid parameters or input data."""

    exit_code = 2


class DomainError(ConfigurationError):
    """An argument lies outside the domain of the operation."""


class InvariantError(ConfigurationError):
    """Input data violates a named invariant."""

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class ComputationError(SylError, ArithmeticError):
    """A linear-algebra kernel failed (e.g. eigensolver non-convergence)."""

    exit_code = 3


class ConvergenceError(SylError):
    exit_code = 3


class DiagnosticsError(SylError):
    """Not enough data for a requested diagnostic."""

    exit_code = 3


class DegeneracyError(SylError):
    """The radial ODE hit the cone boundary (mu_t <= cone_floor)."""

    exit_code = 3


class InconsistencyError(SylError):
    """Data cannot come from a singular hypersurface / no real solution."""

    exit_code = 4


class NoRealSolutionError(InconsistencyError):
    pass


class DegeneracyWarning(UserWarning):
    """Double root: the two normal derivatives coincide (no genuine jump)."""


class NumericalPrecisionWarning(UserWarning):
    pass
