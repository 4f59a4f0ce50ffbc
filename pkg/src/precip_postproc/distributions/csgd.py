"""
Censored-shifted gamma distribution (CSGD).

X = max(0, δ + θZ) with Z ~ Gamma(k, 1), δ < 0, so F(z) = G_k((z-δ)/θ) for
z ≥ 0 and the atom at 0 is G_k(c̃) with c̃ = -δ/θ.

Raw moments follow from ∫_c̃^∞ zʲ g_k(z) dz = (k)ⱼ (1 - G_{k+j}(c̃)):

    E[Xⁿ] = Σⱼ C(n, j) θʲ δⁿ⁻ʲ (k)ⱼ (1 - G_{k+j}(c̃))

with (k)ⱼ the rising factorial. This is the Monte-Carlo-validated form; there
is no leading (1 - G_k(c̃)) factor.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from ..errors import DomainError
from .special_math import gamma_cdf, gamma_quantile, gamma_sf


@dataclass(frozen=True)
class CsgdParams:
    k: np.ndarray | float
    theta: np.ndarray | float
    delta: np.ndarray | float

    def __post_init__(self):
        k = np.asarray(self.k, dtype=np.float64)
        theta = np.asarray(self.theta, dtype=np.float64)
        delta = np.asarray(self.delta, dtype=np.float64)
        if np.any(~((k > 0.0) & np.isfinite(k))):
            raise DomainError("CSGD requires a finite shape k > 0")
        if np.any(~((theta > 0.0) & np.isfinite(theta))):
            raise DomainError("CSGD requires a finite scale theta > 0")
        if np.any(~((delta < 0.0) & np.isfinite(delta))):
            raise DomainError("CSGD requires a finite shift delta < 0")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "delta", delta)

    @property
    def c_tilde(self) -> np.ndarray:
        return -self.delta / self.theta

    @property
    def shape(self) -> tuple[int, ...]:
        return np.broadcast_shapes(self.k.shape, self.theta.shape, self.delta.shape)

    def __getitem__(self, index) -> "CsgdParams":
        k, theta, delta = np.broadcast_arrays(self.k, self.theta, self.delta)
        return CsgdParams(k[index], theta[index], delta[index])

    def stack(self) -> np.ndarray:
        """Parameter fields stacked on a trailing axis: (..., 3) = (k, theta, delta)."""
        return np.stack(np.broadcast_arrays(self.k, self.theta, self.delta), axis=-1)

    @classmethod
    def from_stack(cls, fields: np.ndarray) -> "CsgdParams":
        fields = np.asarray(fields, dtype=np.float64)
        return cls(fields[..., 0], fields[..., 1], fields[..., 2])


def _out(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def csgd_point_mass(p: CsgdParams):
    """Probability of exactly zero, G_k(c̃)."""
    return gamma_cdf(p.k, p.c_tilde)


def csgd_cdf(p: CsgdParams, z):
    """
    Cumulative distribution function, G_k((z − δ)/θ) for z ≥ 0.

    Args:
        p: CSGD parameters (scalars or arrays).
        z: Evaluation points, broadcast against the parameters.

    Returns:
        F(z); 0 below zero, the point mass G_k(c̃) at zero.
    """
    z = np.asarray(z, dtype=np.float64)
    return _out(np.where(z >= 0.0, gamma_cdf(p.k, (z - p.delta) / p.theta), 0.0))


def _csgd_quantile(p: CsgdParams, prob: np.ndarray) -> np.ndarray:
    return np.maximum(p.delta + p.theta * gamma_quantile(p.k, prob), 0.0)


def csgd_quantile(p: CsgdParams, prob):
    """
    Quantile function, 0 for prob up to the point mass.

    Raises:
        DomainError: If any prob lies outside (0, 1).
    """
    prob = np.asarray(prob, dtype=np.float64)
    if np.any(~((prob > 0.0) & (prob < 1.0))):
        raise DomainError("csgd_quantile requires 0 < prob < 1")
    return _out(_csgd_quantile(p, prob))


def csgd_raw_moment(p: CsgdParams, n: int):
    """E[Xⁿ] of the censored-shifted gamma."""
    c = p.c_tilde
    total = 0.0
    rising = 1.0
    for j in range(n + 1):
        if j > 0:
            rising = rising * (p.k + j - 1)
        total = total + comb(n, j) * p.theta**j * p.delta ** (n - j) * rising * gamma_sf(p.k + j, c)
    return _out(total)


def csgd_moments(p: CsgdParams):
    """First three raw moments (m1, m2, m3)."""
    m1 = np.maximum(csgd_raw_moment(p, 1), 0.0)
    m2 = np.maximum(csgd_raw_moment(p, 2), m1 * m1)
    m3 = csgd_raw_moment(p, 3)
    return _out(m1), _out(m2), _out(m3)


def csgd_mean(p: CsgdParams):
    """E[X], the first raw moment."""
    return csgd_moments(p)[0]


def csgd_var(p: CsgdParams):
    """Var[X] from the first two raw moments, clipped at 0."""
    m1, m2, _ = csgd_moments(p)
    return _out(np.maximum(m2 - m1 * m1, 0.0))


def csgd_sample(p: CsgdParams, rng: np.random.Generator, size=None):
    """Draw gamma variates, shift by δ, censor at 0."""
    size = p.shape if size is None else size
    z = rng.standard_gamma(np.broadcast_to(p.k, size) if p.k.ndim else float(p.k), size=size)
    return _out(np.maximum(p.delta + p.theta * z, 0.0))
