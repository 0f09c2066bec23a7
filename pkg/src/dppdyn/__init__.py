"""Glauber and Kawasaki dynamics for discrete determinantal point processes.

Build a validated kernel, query Papangelou intensities through independent
computation paths, sample the measure exactly, simulate the reversible
flip/jump dynamics, and verify invariance, ergodicity constants, and
inverse-submatrix bounds with exact small-system oracles.
"""

from .backend import BACKEND
from .dpp import DppMeasure, dlr_residual
from .errors import DppDynError
from .exactcheck import (
    GammaData,
    GeneratorMatrix,
    build_gamma_data,
    build_generator,
    complex_embedding,
    contraction_check,
    inverse_bound_bruteforce,
    invariance_residual,
    spectral_gap,
    triple_norm,
)
from .kernel import (
    Kernel,
    KernelSpec,
    SiteSpace,
    build_kernel,
    check_assumption_a,
    load_kernel_matrix,
    restrict_a_bracket,
)
from .papangelou import (
    Configuration,
    PapangelouEngine,
    alpha,
    alpha_bounds_check,
    alpha_difference,
    alpha_variational,
    beta,
    beta_variational,
)
from .rates import (
    RateSpec,
    detailed_balance_residual,
    g_factor,
    glauber_rates,
    kawasaki_rate,
    liggett_constants,
)
from .simulate import SimConfig, Trajectory, estimate_correlations, run, run_replicas
from .suite import verification_suite

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Configuration",
    "DppDynError",
    "DppMeasure",
    "GammaData",
    "GeneratorMatrix",
    "Kernel",
    "KernelSpec",
    "PapangelouEngine",
    "RateSpec",
    "SimConfig",
    "SiteSpace",
    "Trajectory",
    "alpha",
    "alpha_bounds_check",
    "alpha_difference",
    "alpha_variational",
    "beta",
    "beta_variational",
    "build_gamma_data",
    "build_generator",
    "build_kernel",
    "check_assumption_a",
    "complex_embedding",
    "contraction_check",
    "detailed_balance_residual",
    "dlr_residual",
    "estimate_correlations",
    "g_factor",
    "glauber_rates",
    "inverse_bound_bruteforce",
    "invariance_residual",
    "kawasaki_rate",
    "liggett_constants",
    "load_kernel_matrix",
    "restrict_a_bracket",
    "run",
    "run_replicas",
    "spectral_gap",
    "triple_norm",
    "verification_suite",
]
