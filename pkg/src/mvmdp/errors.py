"""Exception hierarchy. Exit-code mapping lives in the CLI."""


class MvmdpError(Exception):
    """Base class for all package errors."""


class ValidationError(MvmdpError):
    """Malformed inputs: bad shapes, invalid distributions, broken invariants."""


class FeasibilityError(ValidationError):
    """A policy assigns an action outside the feasible set of some state."""


class EvaluationError(MvmdpError):
    """Exact evaluation failed, e.g. the stationary distribution is not unique."""


class SolverError(MvmdpError):
    """A solver run could not proceed or did not converge."""


class ModelIOError(MvmdpError):
    """A model, policy, or output file could not be read or written."""
