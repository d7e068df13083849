"""Exception types shared by the solver modules and the command line."""


class CavitationError(Exception):
    """Base class for every failure raised by the solver stack."""

    code = "error"


class DomainError(CavitationError, ValueError):
    code = "domain"


class BracketError(CavitationError):
    code = "bracket_failure"


class IntegrationError(CavitationError):
    code = "integration"


class StepUnderflowError(IntegrationError):
    code = "step_underflow"


class NonFiniteRhsError(IntegrationError):
    code = "nonfinite_rhs"


class HypothesisViolation(CavitationError):
    code = "hypothesis_violation"


class NoConnectionError(CavitationError):
    code = "no_connection"


class MultipleRootsError(CavitationError):
    code = "multiple_roots"


class H6Violation(CavitationError):
    code = "h6_violation"


class GridViolation(CavitationError):
    code = "grid_violation"


class OutOfRangeError(CavitationError):
    code = "out_of_range"


class ConfigError(CavitationError):
    code = "config"


class SlowConvergenceWarning(UserWarning):
    """The inner bracket did not shrink below the requested width."""

    code = "slow_convergence"
