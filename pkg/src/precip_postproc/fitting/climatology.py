"""
Per-grid-point climatological reference forecasts.

Each grid point gets the moments fit of its training observations; points
where the fit fails fall back to the empirical quantiles of the sample.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .moments import fit_moments
from .quantiles import QuantileForecast, check_levels, default_levels

logger = logging.getLogger(__name__)


@dataclass
class ClimatologyResult:
    forecast: QuantileForecast
    params: np.ndarray
    fitted: np.ndarray


def fit_climatology(observations, family: str, levels=None) -> ClimatologyResult:
    """
    Args:
        observations: (n_days, H, W) training observations.
        family: "gtcnd" or "csgd".
        levels: quantile levels of the returned forecast (default i/108).
    """
    obs = np.asarray(observations, dtype=np.float64)
    if obs.ndim != 3 or obs.shape[0] < 2:
        raise DomainError("observations must be (n_days >= 2, H, W)")
    levels = default_levels() if levels is None else check_levels(levels)
    _, H, W = obs.shape

    values = np.empty((H, W, levels.size))
    params = np.full((H, W, 3), np.nan)
    fitted = np.zeros((H, W), dtype=bool)

    dry = np.mean(obs == 0.0, axis=0)
    m1, m2, m3 = (np.mean(obs**n, axis=0) for n in (1, 2, 3))
    for i in range(H):
        for j in range(W):
            fit = fit_moments(family, dry[i, j], m1[i, j], m2[i, j], m3[i, j])
            if fit.success:
                q = QuantileForecast.from_distribution(fit.params, levels)
                values[i, j] = q.values
                params[i, j] = fit.params.stack()
                fitted[i, j] = True
            else:
                values[i, j] = np.quantile(obs[:, i, j], levels)

    logger.info("climatology: %d/%d points fitted (%s)", int(fitted.sum()), H * W, family)
    return ClimatologyResult(QuantileForecast(levels, values), params, fitted)
