"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): validation
problems with the *input* and numerical failures that happen *during* a
computation.
"""


class MultiflowError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MultiflowError):
    """Input violates a documented precondition or invariant."""


class StructureError(ValidationError):
    """Mismatched phase counts, grids or array shapes."""


class SolvabilityError(ValidationError):
    """Right-hand side of an elliptic problem is not in the range of the operator."""


class ConstraintError(ValidationError):
    """A multiphase velocity is not divergence-free w.r.t. the multiphase density."""


class NormalFormError(ValidationError):
    """A coset representative is not in its normal form."""


class ConfigError(ValidationError):
    """Malformed or invalid scenario configuration."""


class SnapshotError(ValidationError):
    """Snapshot file is truncated, corrupt or of an unknown version."""


class NumericalError(MultiflowError):
    """A computation broke down (as opposed to being handed bad input)."""


class ConvergenceError(NumericalError):
    """Iterative solver hit its iteration cap."""


class PositivityError(NumericalError):
    """A phase density became non-positive."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class CFLError(NumericalError):
    """Time step exceeds the advective stability limit."""


class StepSizeError(NumericalError):
    """Finite-difference perturbation left the cone of positive densities."""


class FoldError(NumericalError):
    """A one-dimensional flow map stopped being monotone."""
