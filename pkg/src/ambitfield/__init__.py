"""Causal Lévy-basis ambit fields with prescribed multiscaling.

Build the ambit boundary from a target two-point exponent, evaluate exact
n-point correlators and scaling exponents, simulate lattice realisations
and estimate their statistics.
"""

__version__ = "0.1.0"

from .ambit import (
    AmbitBoundary,
    AmbitRegion,
    MultiplicityProfile,
    ScalingSpec,
    ambit_mask,
    build_boundary,
    half_width,
    multiplicity_profile,
    overlap_volume,
)
from .correlators import (
    appendix_error_bound,
    appendix_Fn,
    appendix_Fn_bound,
    check_multifractal_condition,
    critical_order,
    exponent_table,
    fusion_prediction,
    h_increment,
    mean_field,
    mu_exponent,
    n_point,
    n_point_weighted,
    tau_exponent,
    two_point,
    xi_exponent,
)
from .estimate import (
    FiniteSampleWarning,
    PowerLawFit,
    coarse_moments,
    empirical_two_point,
    fit_powerlaw,
)
from .levy import NIG, CumulantDomainError, Gamma, Gaussian, Poisson, StableSkewed, cumulant, sample_cell
from .simulate import FieldRealization, LatticeConfig, generate, load_realizations, save_realizations

__all__ = [
    "AmbitBoundary",
    "AmbitRegion",
    "CumulantDomainError",
    "FieldRealization",
    "FiniteSampleWarning",
    "Gamma",
    "Gaussian",
    "LatticeConfig",
    "MultiplicityProfile",
    "NIG",
    "Poisson",
    "PowerLawFit",
    "ScalingSpec",
    "StableSkewed",
    "ambit_mask",
    "appendix_Fn",
    "appendix_Fn_bound",
    "appendix_error_bound",
    "build_boundary",
    "check_multifractal_condition",
    "coarse_moments",
    "critical_order",
    "cumulant",
    "empirical_two_point",
    "exponent_table",
    "fit_powerlaw",
    "fusion_prediction",
    "generate",
    "h_increment",
    "half_width",
    "load_realizations",
    "mean_field",
    "mu_exponent",
    "multiplicity_profile",
    "n_point",
    "n_point_weighted",
    "overlap_volume",
    "sample_cell",
    "save_realizations",
    "tau_exponent",
    "two_point",
    "xi_exponent",
]
