"""Multiphase and generalized incompressible Euler flows on flat periodic tori."""

from .errors import (
    CFLError,
    ConfigError,
    ConstraintError,
    ConvergenceError,
    FoldError,
    MultiflowError,
    NormalFormError,
    NumericalError,
    PositivityError,
    SnapshotError,
    SolvabilityError,
    StepSizeError,
    StructureError,
    ValidationError,
)
from .spectral import Grid, spectral_derivative
from .state import (
    DualCotangent,
    MomentumCoset,
    MultiDensity,
    MultiVelocity,
    QuadratureSet,
    TangentDensity,
    normalize_coset,
    normalize_dual_cotangent,
    validate,
)
from .dynamics import FlowState, step_rk4

__version__ = "0.1.0"
