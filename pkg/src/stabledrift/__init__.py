"""Numerics for stable-driven SDEs and PDEs with distributional (Besov) drifts."""

__version__ = "0.1.0"

from .spectral import SpectralMeasure, characteristic_exponent, nondegeneracy_constants
from .grid import Grid, GridFunction
from .kernel import density_grid, default_grid, sample_increment, verify_kernel_bounds
from .besov import BesovIndex, besov_norm, duality_check, holder_exponent, verify_product_bound
from .regularity import RegularityParams, check_gate
from .drift import DriftField, DriftSpec, build_drift, mollify
from .pde import PdeProblem, schauder_report, solve_mild, zvonkin_problem, zvonkin_transform
from .sde import DriftIncrementRule, drift_increment, euler_paths

__all__ = [
    "SpectralMeasure", "characteristic_exponent", "nondegeneracy_constants",
    "Grid", "GridFunction",
    "density_grid", "default_grid", "sample_increment", "verify_kernel_bounds",
    "BesovIndex", "besov_norm", "duality_check", "holder_exponent", "verify_product_bound",
    "RegularityParams", "check_gate",
    "DriftField", "DriftSpec", "build_drift", "mollify",
    "PdeProblem", "schauder_report", "solve_mild", "zvonkin_problem", "zvonkin_transform",
    "DriftIncrementRule", "drift_increment", "euler_paths",
]
