"""
Precip Postproc - Distributional postprocessing of gridded ensemble precipitation forecasts.

This package provides tools for:
- Censored parametric forecast distributions (GTCND, CSGD) and their closed-form CRPS
- Moments fitting and tail extension of quantile forecasts
- A small U-Net trained by CRPS minimization on gridded predictors
- Probabilistic verification: CRPS/CRPSS maps, rank histograms with flatness tests, ROC curves
- Synthetic gridded datasets with known truth and a bit-exact file format
"""

__version__ = "1.0.0"
