"""kmslab: discrete lab for a coupled nonlocal p-Laplacian system.

Layers, bottom to top: exponent/threshold arithmetic (`exponents`), coupling
nonlinearities (`nonlinearity`), flux algebra and monotonicity inequalities
(`plaplace`), grids/fields/quadrature (`grids`), the fixed-point solver
(`solver`), verification experiments (`experiments`) and the `kmslab` CLI
(`cli`).
"""

__version__ = "0.1.0"

from .exponents import (
    ProblemParams,
    Zone,
    admissibility_check,
    eta_threshold_exponent,
    holder_conjugate,
    regularized_exponents,
    sigma_exponent,
    sobolev_conjugate,
    zone_classify,
)
from .grids import Field, Grid
from .nonlinearity import NonlinearitySpec, verify_growth_bounds
from .solver import SolveConfig, SolveResult, k_continuation, picard_system_solve

__all__ = [
    "Field",
    "Grid",
    "NonlinearitySpec",
    "ProblemParams",
    "SolveConfig",
    "SolveResult",
    "Zone",
    "admissibility_check",
    "eta_threshold_exponent",
    "holder_conjugate",
    "k_continuation",
    "picard_system_solve",
    "regularized_exponents",
    "sigma_exponent",
    "sobolev_conjugate",
    "verify_growth_bounds",
    "zone_classify",
    "__version__",
]
