"""Numeric layer: float evaluation, eigenvalue scans, integration, experiments."""

from .eigen import EigenConvergenceError, balance, eigenvalues, hessenberg
from .evaluator import CompiledMap, CompiledPolys, compile_map, jacobian_at
from .experiments import (
    AttractorSummary,
    RotationCheck,
    attractor_experiment,
    exponential_solution_residual,
    plane_rotation_check,
)
from .ode import (
    CONVERGED,
    DIVERGED,
    MAX_TIME,
    IntegrationCancelled,
    IntegratorConfig,
    StepSizeUnderflow,
    Trajectory,
    dopri5_step,
    fixed_step_solve,
    integrate,
    integrate_ensemble,
)
from .scans import (
    ScanConfig,
    ScanReport,
    density_scan,
    divergence_numerator,
    hurwitz_scan,
    integrability_check,
    restrict_to_plane,
    sample_points,
)

__all__ = [
    "EigenConvergenceError",
    "balance",
    "eigenvalues",
    "hessenberg",
    "CompiledMap",
    "CompiledPolys",
    "compile_map",
    "jacobian_at",
    "AttractorSummary",
    "RotationCheck",
    "attractor_experiment",
    "exponential_solution_residual",
    "plane_rotation_check",
    "CONVERGED",
    "DIVERGED",
    "MAX_TIME",
    "IntegrationCancelled",
    "IntegratorConfig",
    "StepSizeUnderflow",
    "Trajectory",
    "dopri5_step",
    "fixed_step_solve",
    "integrate",
    "integrate_ensemble",
    "ScanConfig",
    "ScanReport",
    "density_scan",
    "divergence_numerator",
    "hurwitz_scan",
    "integrability_check",
    "restrict_to_plane",
    "sample_points",
]
