"""
Generalized truncated/censored normal distribution (GTCND) with lower bound 0.

F(z) = L + (1-L) * (Φ((z-μ)/σ) - Φ(-μ/σ)) / Φ(μ/σ) for z ≥ 0, and 0 below.

L is the point mass at 0, (μ, σ) locate and scale the zero-truncated normal
part. Parameters may be scalars or equally-shaped arrays (one per grid point).

Moments are those of the full mixture, i.e. (1-L) times the truncated-normal
moments; the truncated-normal mean and variance alone are exposed separately
because the moments fit works on the continuous part.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import DomainError


@dataclass(frozen=True)
class GtcndParams:
    L: np.ndarray | float
    mu: np.ndarray | float
    sigma: np.ndarray | float

    def __post_init__(self):
        L = np.asarray(self.L, dtype=np.float64)
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if np.any(~((L >= 0.0) & (L <= 1.0))):
            raise DomainError("GTCND requires 0 <= L <= 1")
        if np.any(~np.isfinite(mu)):
            raise DomainError("GTCND requires a finite mu")
        if np.any(~((sigma > 0.0) & np.isfinite(sigma))):
            raise DomainError("GTCND requires a finite sigma > 0")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def shape(self) -> tuple[int, ...]:
        return np.broadcast_shapes(self.L.shape, self.mu.shape, self.sigma.shape)

    def __getitem__(self, index) -> "GtcndParams":
        L, mu, sigma = np.broadcast_arrays(self.L, self.mu, self.sigma)
        return GtcndParams(L[index], mu[index], sigma[index])

    def stack(self) -> np.ndarray:
        """Parameter fields stacked on a trailing axis: (..., 3) = (L, mu, sigma)."""
        return np.stack(np.broadcast_arrays(self.L, self.mu, self.sigma), axis=-1)

    @classmethod
    def from_stack(cls, fields: np.ndarray) -> "GtcndParams":
        fields = np.asarray(fields, dtype=np.float64)
        return cls(fields[..., 0], fields[..., 1], fields[..., 2])


def _out(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def _wet_tail_ratio(p: GtcndParams, t) -> np.ndarray:
    """log(Φ(−t)/Φ(μ/σ)) for the standardized value t = (z − μ)/σ, capped at 0."""
    return np.minimum(special.log_ndtr(-t) - special.log_ndtr(p.mu / p.sigma), 0.0)


def gtcnd_cdf(p: GtcndParams, z):
    """
    Cumulative distribution function.

    The truncated-normal part is 1 − Φ(−t)/Φ(μ/σ), evaluated in log space so
    that μ/σ far below zero keeps its digits.

    Args:
        p: GTCND parameters (scalars or arrays).
        z: Evaluation points, broadcast against the parameters.

    Returns:
        F(z); 0 for z < 0 and at least L from z = 0 on.
    """
    z = np.asarray(z, dtype=np.float64)
    t = (np.maximum(z, 0.0) - p.mu) / p.sigma
    body = -np.expm1(_wet_tail_ratio(p, t))
    return _out(np.where(z >= 0.0, p.L + (1.0 - p.L) * body, 0.0))


def _gtcnd_quantile(p: GtcndParams, prob: np.ndarray) -> np.ndarray:
    """Quantile on [0, 1) without argument checks; used by sampling too."""
    one_minus_L = np.where(p.L < 1.0, 1.0 - p.L, 1.0)
    r = np.clip((prob - p.L) / one_minus_L, 0.0, 1.0)
    # solve Φ(−t)/Φ(μ/σ) = 1 − r for t
    with np.errstate(divide="ignore"):
        log_tail = np.log1p(-r) + special.log_ndtr(p.mu / p.sigma)
    x = np.maximum(p.mu - p.sigma * special.ndtri_exp(log_tail), 0.0)
    return np.where(prob <= p.L, 0.0, x)


def gtcnd_quantile(p: GtcndParams, prob):
    """
    Quantile function, 0 for prob ≤ L.

    Raises:
        DomainError: If any prob lies outside (0, 1).
    """
    prob = np.asarray(prob, dtype=np.float64)
    if np.any(~((prob > 0.0) & (prob < 1.0))):
        raise DomainError("gtcnd_quantile requires 0 < prob < 1")
    return _out(_gtcnd_quantile(p, prob))


def inverse_mills(a: np.ndarray) -> np.ndarray:
    """φ(a)/(1 − Φ(a)), stable for large a."""
    return np.exp(-0.5 * a * a - 0.5 * np.log(2.0 * np.pi) - special.log_ndtr(-a))


def truncnorm_mean(mu, sigma):
    """Mean of N(μ, σ²) truncated to [0, ∞)."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    return mu + sigma * inverse_mills(-mu / sigma)


def truncnorm_var(mu, sigma):
    """Variance of N(μ, σ²) truncated to [0, ∞)."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    alpha = -mu / sigma
    lam = inverse_mills(alpha)
    return sigma * sigma * (1.0 + alpha * lam - lam * lam)


def gtcnd_mean(p: GtcndParams):
    """Mixture mean (1 − L)·E[truncated normal]."""
    return _out((1.0 - p.L) * truncnorm_mean(p.mu, p.sigma))


def gtcnd_var(p: GtcndParams):
    """
    Mixture variance, including the spread between the dry atom and the wet part.

    Args:
        p: GTCND parameters.

    Returns:
        (1 − L)(v + m²) − ((1 − L)m)², with m and v the truncated-normal mean and variance.
    """
    m = truncnorm_mean(p.mu, p.sigma)
    second = (1.0 - p.L) * (truncnorm_var(p.mu, p.sigma) + m * m)
    mean = (1.0 - p.L) * m
    return _out(np.maximum(second - mean * mean, 0.0))


def gtcnd_sample(p: GtcndParams, rng: np.random.Generator, size=None):
    """Inverse-transform draws; `size` defaults to the parameter shape."""
    size = p.shape if size is None else size
    return _out(_gtcnd_quantile(p, rng.random(size)))
