"""
Special functions used by the GTCND and CSGD families.

Thin, validated wrappers around scipy.special. All arithmetic is float64 even
when the caller holds float32 grids. Every function accepts scalars or arrays
and broadcasts like numpy; scalars come back as numpy float64.

Quantiles are polished with bracketed root-finding whenever the library inverse
misses the round-trip tolerance (typical for tiny gamma shapes).
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq

from ..errors import DomainError

NORMAL_ROUNDTRIP_TOL = 1e-12
GAMMA_ROUNDTRIP_TOL = 1e-10


def _f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _out(x: np.ndarray):
    return x[()] if x.ndim == 0 else x


def std_normal_cdf(z):
    """Φ(z)."""
    return _out(special.ndtr(_f64(z)))


def std_normal_pdf(z):
    """φ(z) = exp(-z²/2)/√(2π)."""
    z = _f64(z)
    return _out(np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi))


def std_normal_quantile(p):
    """Φ⁻¹(p) for p in (0, 1)."""
    p = _f64(p)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("std_normal_quantile requires 0 < p < 1")
    return _out(special.ndtri(p))


def _check_shape(k: np.ndarray, name: str = "k") -> None:
    if np.any(~(k > 0.0)) or np.any(~np.isfinite(k)):
        raise DomainError(f"gamma shape {name} must be finite and > 0")


def gamma_cdf(k, x):
    """G_k(x), the regularized lower incomplete gamma function; 0 for x ≤ 0."""
    k = _f64(k)
    _check_shape(k)
    x = _f64(x)
    return _out(special.gammainc(k, np.maximum(x, 0.0)))


def gamma_sf(k, x):
    """1 − G_k(x) computed without cancellation."""
    k = _f64(k)
    _check_shape(k)
    x = _f64(x)
    return _out(special.gammaincc(k, np.maximum(x, 0.0)))


def gamma_pdf(k, x):
    """Density of the unit-scale gamma distribution of shape k."""
    k = _f64(k)
    x = _f64(x)
    pos = x > 0.0
    xs = np.where(pos, x, 1.0)
    logp = special.xlogy(k - 1.0, xs) - xs - special.gammaln(k)
    return _out(np.where(pos, np.exp(logp), 0.0))


def _polish_gamma_quantile(k: float, p: float, guess: float) -> float:
    f = lambda x: special.gammainc(k, x) - p
    guess = guess if np.isfinite(guess) and guess > 0.0 else max(k, 1e-300)
    lo, hi = guess, guess
    while f(lo) > 0.0 and lo > 1e-300:
        lo *= 0.5
    while f(hi) < 0.0:
        hi = 2.0 * hi + 1.0
    if f(lo) > 0.0:
        return 0.0
    return brentq(f, lo, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)


def gamma_quantile(k, p):
    """The x with G_k(x) = p, for p in [0, 1); equals γ⁻¹(k, pΓ(k))."""
    k = _f64(k)
    _check_shape(k)
    p = _f64(p)
    if np.any(~((p >= 0.0) & (p < 1.0))):
        raise DomainError("gamma_quantile requires 0 <= p < 1")
    k, p = np.broadcast_arrays(k, p)
    shape = p.shape
    k, p = k.ravel(), p.ravel()
    x = np.where(p > 0.0, special.gammaincinv(k, p), 0.0)
    miss = (p > 0.0) & ~(np.abs(special.gammainc(k, x) - p) <= GAMMA_ROUNDTRIP_TOL)
    for i in np.flatnonzero(miss):
        x[i] = _polish_gamma_quantile(float(k[i]), float(p[i]), float(x[i]))
    return _out(x.reshape(shape))


def beta_fn(a, b):
    """B(a, b) = Γ(a)Γ(b)/Γ(a+b), evaluated through log-gamma."""
    a = _f64(a)
    b = _f64(b)
    if np.any(~(a > 0.0)) or np.any(~(b > 0.0)):
        raise DomainError("beta_fn requires a > 0 and b > 0")
    return _out(np.exp(special.betaln(a, b)))


@dataclass(frozen=True)
class SpecialOps:
    """
    Function table the closed-form CRPS expressions are written against.

    The same expression is evaluated on plain arrays (SCIPY_OPS) and on the
    network's differentiable tensors (gridnet.autodiff.AUTODIFF_OPS).
    """

    log_ndtr: Callable
    gammainc: Callable
    betaln: Callable
    exp: Callable


SCIPY_OPS = SpecialOps(
    log_ndtr=special.log_ndtr,
    gammainc=special.gammainc,
    betaln=special.betaln,
    exp=np.exp,
)
