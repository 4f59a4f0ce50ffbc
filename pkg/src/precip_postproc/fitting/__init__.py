"""
Quantile forecasts, moments fitting and tail extension.

Modules:
- quantiles: QuantileForecast (fixed level grid, interpolated cdf) and default levels
- moments: empirical moments and moments-method fits of the GTCND and CSGD
- tail: activation-gated tail extension of quantile forecasts, per point and per grid
- climatology: per-point climatological reference forecasts from training observations
"""

from .climatology import ClimatologyResult, fit_climatology
from .moments import FitResult, empirical_moments, fit_csgd, fit_gtcnd, fit_moments
from .quantiles import N_LEVELS, QuantileForecast, default_levels
from .tail import TailConfig, TailGridResult, TailResult, tail_extend, tail_extend_grid

__all__ = [
    "N_LEVELS",
    "ClimatologyResult",
    "FitResult",
    "QuantileForecast",
    "TailConfig",
    "TailGridResult",
    "TailResult",
    "default_levels",
    "empirical_moments",
    "fit_climatology",
    "fit_csgd",
    "fit_gtcnd",
    "fit_moments",
    "tail_extend",
    "tail_extend_grid",
]
