"""
Quantile forecasts at a fixed level grid.

A QuantileForecast holds one strictly increasing level vector shared by every
grid point and a values array whose last axis runs over the levels. The
induced cdf linearly interpolates the empirical quantile function:

    F(t) = 0                                     t < q_1
    F(t) = a_j + (a_{j+1} - a_j)(t - q_j)/(q_{j+1} - q_j)   q_j ≤ t < q_{j+1}
    F(t) = 1                                     t ≥ q_n

with j the last level whose value is ≤ t (so tied zeros map to the highest
tied level, i.e. the dry fraction).
"""

from dataclasses import dataclass

import numpy as np

from ..distributions import CsgdParams, GtcndParams, family_quantile
from ..errors import DomainError

N_LEVELS = 107


def default_levels(n: int = N_LEVELS) -> np.ndarray:
    """Equidistant levels i/(n+1), i = 1..n."""
    if n < 1:
        raise DomainError("at least one quantile level is required")
    return np.arange(1, n + 1, dtype=np.float64) / (n + 1)


def check_levels(levels) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or levels.size == 0:
        raise DomainError("levels must be a non-empty vector")
    if np.any(~((levels > 0.0) & (levels < 1.0))):
        raise DomainError("levels must lie in (0, 1)")
    if np.any(np.diff(levels) <= 0.0):
        raise DomainError("levels must be strictly increasing")
    return levels


@dataclass(frozen=True)
class QuantileForecast:
    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        levels = check_levels(self.levels)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 0 or values.shape[-1] != levels.size:
            raise DomainError(f"values must end in an axis of {levels.size} levels, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("quantile values must be finite")
        if np.any(values < 0.0):
            raise DomainError("quantile values must be >= 0")
        if np.any(np.diff(values, axis=-1) < 0.0):
            raise DomainError("quantile values must be nondecreasing")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", values)

    @property
    def n_levels(self) -> int:
        return self.levels.size

    @property
    def shape(self) -> tuple[int, ...]:
        """Grid shape (values without the level axis)."""
        return self.values.shape[:-1]

    def __getitem__(self, index) -> "QuantileForecast":
        if not self.shape:
            raise DomainError("a single forecast cannot be indexed")
        return QuantileForecast(self.levels, self.values[index])

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        t_b = np.broadcast_to(t, np.broadcast_shapes(t.shape, self.shape))
        values = np.broadcast_to(self.values, t_b.shape + (self.n_levels,))
        n = self.n_levels

        j = np.sum(values <= t_b[..., None], axis=-1) - 1
        inner = (j >= 0) & (j < n - 1)
        lo = np.clip(j, 0, n - 1)
        hi = np.clip(j + 1, 0, n - 1)
        v_lo = np.take_along_axis(values, lo[..., None], axis=-1)[..., 0]
        v_hi = np.take_along_axis(values, hi[..., None], axis=-1)[..., 0]
        gap = v_hi - v_lo
        frac = np.divide(t_b - v_lo, gap, out=np.zeros_like(gap), where=gap > 0.0)
        interp = self.levels[lo] + (self.levels[hi] - self.levels[lo]) * frac

        out = np.where(j < 0, 0.0, np.where(inner, interp, 1.0))
        return out[()] if out.ndim == 0 else out

    def exceedance(self, t):
        """P(X > t) under the interpolated cdf."""
        return 1.0 - self.cdf(t)

    def quantile(self, prob):
        """Values interpolated over levels, clamped to the outermost quantiles."""
        prob = np.asarray(prob, dtype=np.float64)
        if np.any(~((prob > 0.0) & (prob < 1.0))):
            raise DomainError("prob must lie in (0, 1)")
        pos = np.clip(np.interp(prob, self.levels, np.arange(self.n_levels, dtype=np.float64)), 0, self.n_levels - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, self.n_levels - 1)
        w = pos - lo
        return self.values[..., lo] * (1.0 - w) + self.values[..., hi] * w

    def replace_values(self, values) -> "QuantileForecast":
        return QuantileForecast(self.levels, values)

    @classmethod
    def from_distribution(cls, params: GtcndParams | CsgdParams, levels=None) -> "QuantileForecast":
        """Evaluate a (gridded) parametric forecast at the level grid."""
        levels = default_levels() if levels is None else check_levels(levels)
        fields = params.stack()[..., None, :]
        expanded = type(params).from_stack(fields)
        return cls(levels, np.asarray(family_quantile(expanded, levels), dtype=np.float64))
