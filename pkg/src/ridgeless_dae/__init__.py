"""Minimum-norm kernel solutions of optimal-control DAEs without transversality."""

__version__ = "0.1.0"

from .errors import (
    BoundViolation,
    ConfigurationError,
    ModelDomainError,
    NewtonFailure,
    NoBracket,
    NonConvergence,
    RidgelessError,
    ShootingDiverged,
    StepUnderflow,
)
from .kernels import KernelSpec, TrainingGrid, gram_matrix, kernel_eval, kernel_integral
from .models import (
    MODEL_FACTORIES,
    Bounds,
    ModelSpec,
    Trajectory,
    build_model,
    dae_residual,
    make_asset_pricing,
    make_human_capital,
    make_neoclassical_growth,
    make_optimal_advertising,
    make_skiba_growth,
)
from .reference import (
    integrate_ivp,
    reference_trajectory,
    relative_error,
    shooting_solve,
    steady_states,
)
from .solver import KernelSolution, SolverConfig, evaluate_solution, penalized_norm, solve

__all__ = [
    "BoundViolation",
    "Bounds",
    "ConfigurationError",
    "KernelSolution",
    "KernelSpec",
    "MODEL_FACTORIES",
    "ModelDomainError",
    "ModelSpec",
    "NewtonFailure",
    "NoBracket",
    "NonConvergence",
    "RidgelessError",
    "ShootingDiverged",
    "SolverConfig",
    "StepUnderflow",
    "Trajectory",
    "TrainingGrid",
    "build_model",
    "dae_residual",
    "evaluate_solution",
    "gram_matrix",
    "integrate_ivp",
    "kernel_eval",
    "kernel_integral",
    "make_asset_pricing",
    "make_human_capital",
    "make_neoclassical_growth",
    "make_optimal_advertising",
    "make_skiba_growth",
    "penalized_norm",
    "reference_trajectory",
    "relative_error",
    "shooting_solve",
    "solve",
    "steady_states",
]
