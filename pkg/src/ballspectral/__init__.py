"""Mixed spectral-Galerkin solver for the biharmonic equation on the unit ball."""

__version__ = "0.1.0"

from .ballbasis import (
    BasisIndex,
    BallPolySpec,
    ball_norm,
    eval_ball,
    eval_generalized,
    index_set,
    mass_tridiagonal,
    stiffness_lambda,
)
from .harmonics import HarmonicIndex, SphericalPoint, angular_analyze, build_angular_grid, eval_harmonic
from .jacobi import JacobiParams, eval_jacobi, eval_jacobi_deriv, gauss_jacobi_rule, jacobi_norm
from .solver import (
    ErrorReport,
    ManufacturedCase,
    SolveResult,
    compute_errors,
    convergence_rate,
    manufactured_case,
    ritz_project,
    run_convergence_study,
    solve_biharmonic,
)
from .transform import BallGrid, CoefficientField, analyze, build_ball_grid, synthesize

__all__ = [
    "__version__",
    "BasisIndex",
    "BallPolySpec",
    "ball_norm",
    "eval_ball",
    "eval_generalized",
    "index_set",
    "mass_tridiagonal",
    "stiffness_lambda",
    "ErrorReport",
    "ManufacturedCase",
    "SolveResult",
    "compute_errors",
    "convergence_rate",
    "manufactured_case",
    "ritz_project",
    "run_convergence_study",
    "solve_biharmonic",
    "HarmonicIndex",
    "SphericalPoint",
    "angular_analyze",
    "build_angular_grid",
    "eval_harmonic",
    "JacobiParams",
    "eval_jacobi",
    "eval_jacobi_deriv",
    "gauss_jacobi_rule",
    "jacobi_norm",
    "BallGrid",
    "CoefficientField",
    "analyze",
    "build_ball_grid",
    "synthesize",
]
