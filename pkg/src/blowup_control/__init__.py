"""Optimal control of finite-time blowup for dy/dt = G(t,|y|) y/|y| + A(t) y + b(t,u)."""

from .core import (
    COMPACT,
    FAIL,
    NOT_CHECKABLE,
    OUTER,
    PASS,
    AssumptionReport,
    BlowupControlError,
    BlowupLowerBound,
    ChartDomainError,
    Coefficient,
    Compactifier,
    ConfigError,
    ControlGeometry,
    ControlKind,
    ControlLaw,
    ControlSystem,
    CostatePath,
    EvaluationError,
    GrowthModel,
    MatrixDrift,
    PMPReport,
    PreconditionError,
    Trajectory,
    make_catalog_system,
    make_system,
)
from .dynamics import (
    ChartFailure,
    IntegrateOptions,
    NoBlowup,
    StepFailure,
    averaged_system,
    blowup_time,
    chatter_convergence,
    chattering_law,
    integrate,
)
from .growth import NotSatisfiable, ThresholdBundle, audit, power_zeta, rho_threshold, tail_integral
from .monotone import HypothesisViolation, certify_monotone, gap, random_instance, run_batch
from .optimize import (
    AllDegenerate,
    BudgetExceeded,
    ConsistencyFailure,
    NotWellPosed,
    brute_force,
    cross_validate,
    sphere_sweep,
)
from .pmp import TI, TS, AdjointMatrixSpec, certify, hamiltonian_control, integrate_adjoint, shoot

__version__ = "0.1.0"

__all__ = [
    "AdjointMatrixSpec",
    "AllDegenerate",
    "AssumptionReport",
    "BlowupControlError",
    "BlowupLowerBound",
    "BudgetExceeded",
    "COMPACT",
    "ChartDomainError",
    "ChartFailure",
    "Coefficient",
    "Compactifier",
    "ConfigError",
    "ConsistencyFailure",
    "ControlGeometry",
    "ControlKind",
    "ControlLaw",
    "ControlSystem",
    "CostatePath",
    "EvaluationError",
    "FAIL",
    "GrowthModel",
    "HypothesisViolation",
    "IntegrateOptions",
    "MatrixDrift",
    "NOT_CHECKABLE",
    "NoBlowup",
    "NotSatisfiable",
    "NotWellPosed",
    "OUTER",
    "PASS",
    "PMPReport",
    "PreconditionError",
    "StepFailure",
    "TI",
    "TS",
    "ThresholdBundle",
    "Trajectory",
    "audit",
    "averaged_system",
    "blowup_time",
    "brute_force",
    "certify",
    "certify_monotone",
    "chatter_convergence",
    "chattering_law",
    "cross_validate",
    "gap",
    "hamiltonian_control",
    "integrate",
    "integrate_adjoint",
    "make_catalog_system",
    "make_system",
    "power_zeta",
    "random_instance",
    "rho_threshold",
    "run_batch",
    "shoot",
    "sphere_sweep",
    "tail_integral",
    "__version__",
]
