"""Financial shocks and income inequality: pooled panel BVAR identification,
panel local projections and survey inequality measures."""

from .errors import (ConfigError, DataError, EstimationError, FinIneqError, IdentificationError)
from .identification import (RestrictionScheme, ShockPanel, cholesky_identify, extract_shocks,
                             identify, scheme)
from .inequality import compute_measures, equivalise, gini, weighted_percentile
from .lp import LpData, LpSpec, dk_cov, lp_irf, lp_irf_signed
from .panel import PanelDataset, align_balanced, interpolate_annual, load_panel
from .psvar import (NwPrior, VarSpec, build_design, companion_irf, gibbs_sample, nw_posterior,
                    reduced_residuals)
from .synthetic import DgpSpec, make_sign_separated_impact, simulate_microdata, simulate_var_panel

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "EstimationError",
    "FinIneqError",
    "IdentificationError",
    "RestrictionScheme",
    "ShockPanel",
    "cholesky_identify",
    "extract_shocks",
    "identify",
    "scheme",
    "compute_measures",
    "equivalise",
    "gini",
    "weighted_percentile",
    "LpData",
    "LpSpec",
    "dk_cov",
    "lp_irf",
    "lp_irf_signed",
    "PanelDataset",
    "align_balanced",
    "interpolate_annual",
    "load_panel",
    "NwPrior",
    "VarSpec",
    "build_design",
    "companion_irf",
    "gibbs_sample",
    "nw_posterior",
    "reduced_residuals",
    "DgpSpec",
    "make_sign_separated_impact",
    "simulate_microdata",
    "simulate_var_panel",
]
