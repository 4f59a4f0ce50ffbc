"""
Proper scoring rules.

Modules:
- crps: closed-form GTCND/CSGD CRPS, quadrature oracle, ensemble estimators,
  pinball/quantile CRPS, Brier exceedance, skill scores and summaries
"""

from .crps import (
    ScoreSummary,
    brier_exceedance,
    crps_csgd,
    crps_ensemble_fair,
    crps_ensemble_nrg,
    crps_from_quantiles,
    crps_gtcnd,
    crps_numeric,
    crps_parametric,
    crps_quantile_integral,
    crps_threshold_integral,
    pinball,
    skill_score,
    summarize,
)

__all__ = [
    "ScoreSummary",
    "brier_exceedance",
    "crps_csgd",
    "crps_ensemble_fair",
    "crps_ensemble_nrg",
    "crps_from_quantiles",
    "crps_gtcnd",
    "crps_numeric",
    "crps_parametric",
    "crps_quantile_integral",
    "crps_threshold_integral",
    "pinball",
    "skill_score",
    "summarize",
]
