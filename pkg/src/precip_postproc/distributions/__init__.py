"""
Censored parametric forecast distributions.

Modules:
- special_math: Φ, φ, Φ⁻¹, regularized incomplete gamma and its inverse, beta function
- gtcnd: generalized truncated/censored normal (point mass L at 0 plus zero-truncated normal)
- csgd: censored-shifted gamma (gamma shifted by δ < 0, censored at 0)
"""

from ..errors import DomainError
from .csgd import (
    CsgdParams,
    csgd_cdf,
    csgd_mean,
    csgd_moments,
    csgd_point_mass,
    csgd_quantile,
    csgd_sample,
    csgd_var,
)
from .gtcnd import (
    GtcndParams,
    gtcnd_cdf,
    gtcnd_mean,
    gtcnd_quantile,
    gtcnd_sample,
    gtcnd_var,
)

FAMILIES = ("gtcnd", "csgd")
PARAM_NAMES = {"gtcnd": ("L", "mu", "sigma"), "csgd": ("k", "theta", "delta")}


def params_from_stack(family: str, fields):
    """Build the family's parameter object from a (..., 3) array."""
    if family == "gtcnd":
        return GtcndParams.from_stack(fields)
    if family == "csgd":
        return CsgdParams.from_stack(fields)
    raise DomainError(f"unknown family: {family}")


def family_cdf(p, z):
    """F(z) for either family."""
    return gtcnd_cdf(p, z) if isinstance(p, GtcndParams) else csgd_cdf(p, z)


def family_quantile(p, prob):
    """Quantile for either family; prob must lie in (0, 1)."""
    return gtcnd_quantile(p, prob) if isinstance(p, GtcndParams) else csgd_quantile(p, prob)


def family_sample(p, rng, size=None):
    """Draws for either family from `rng`."""
    return gtcnd_sample(p, rng, size) if isinstance(p, GtcndParams) else csgd_sample(p, rng, size)


__all__ = [
    "FAMILIES",
    "PARAM_NAMES",
    "CsgdParams",
    "GtcndParams",
    "csgd_cdf",
    "csgd_mean",
    "csgd_moments",
    "csgd_point_mass",
    "csgd_quantile",
    "csgd_sample",
    "csgd_var",
    "family_cdf",
    "family_quantile",
    "family_sample",
    "gtcnd_cdf",
    "gtcnd_mean",
    "gtcnd_quantile",
    "gtcnd_sample",
    "gtcnd_var",
    "params_from_stack",
]
