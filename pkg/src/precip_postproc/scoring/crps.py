"""
Continuous ranked probability score.

Three equivalent representations are available:

- threshold (Brier) form: ∫ (F(t) − 1{y ≤ t})² dt
- quantile (pinball) form: ∫₀¹ 2(1{y ≤ q(α)} − α)(q(α) − y) dα
- kernel form: E|X − y| − ½ E|X − X'|

plus closed forms for the GTCND and CSGD families and the fair/NRG ensemble
estimators. crps_numeric integrates the threshold form adaptively and is the
oracle the closed forms are tested against.

Closed forms are written once against a SpecialOps table so the network loss
can reuse them on differentiable tensors.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..distributions import CsgdParams, GtcndParams
from ..distributions.special_math import SCIPY_OPS, SpecialOps
from ..errors import DomainError, QuadratureError
from ..fitting.quantiles import QuantileForecast

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class ScoreSummary:
    mean_score: float
    n: int
    per_point: np.ndarray | None = None


def _out(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def gtcnd_crps_expr(L, mu, sigma, y, ops: SpecialOps = SCIPY_OPS):
    """
    CRPS of the GTCND at observation y (y is a plain array, never differentiated).

    Every division by Φ(μ/σ) is taken as a ratio in log space, so μ/σ far
    below zero and L = 1 both evaluate without a 0/0:

        r = Φ(−z)/Φ(a), h_z = φ(z)/Φ(a), h_a = φ(a)/Φ(a), s = Φ(√2·a)/Φ(a)²

    with a = μ/σ and z = (y₊ − μ)/σ ≥ −a, so r ≤ 1.
    """
    y = np.asarray(y, dtype=np.float64)
    y_pos = np.maximum(y, 0.0)
    a = mu / sigma
    z = (y_pos - mu) / sigma
    log_kept = ops.log_ndtr(a)
    r = ops.exp(ops.log_ndtr(-z) - log_kept)
    h_z = ops.exp(-0.5 * z * z - LOG_SQRT_2PI - log_kept)
    h_a = ops.exp(-0.5 * a * a - LOG_SQRT_2PI - log_kept)
    s = ops.exp(ops.log_ndtr(SQRT2 * a) - 2.0 * log_kept)
    wet = 1.0 - L

    term_loc = (y_pos - mu) * (1.0 - 2.0 * wet * r)
    term_pdf = 2.0 * sigma * wet * (h_z - L * h_a)
    term_spread = -(wet * wet) * sigma / SQRT_PI * s
    return np.abs(y - y_pos) + mu * L * L + term_loc + term_pdf + term_spread


def csgd_crps_expr(k, theta, delta, y, ops: SpecialOps = SCIPY_OPS):
    """CRPS of the CSGD at observation y, with ỹ = (y₊ − δ)/θ and c̃ = −δ/θ."""
    y = np.asarray(y, dtype=np.float64)
    y_pos = np.maximum(y, 0.0)
    c = -delta / theta
    y_t = (y_pos - delta) / theta

    g_k_y = ops.gammainc(k, y_t)
    g_k1_y = ops.gammainc(k + 1.0, y_t)
    g_k_c = ops.gammainc(k, c)
    g_k1_c = ops.gammainc(k + 1.0, c)
    g_2k_2c = ops.gammainc(2.0 * k, 2.0 * c)
    beta = ops.exp(ops.betaln(0.5, k + 0.5))

    inner = (
        y_t * (2.0 * g_k_y - 1.0)
        - c * g_k_c * g_k_c
        + k * (1.0 + 2.0 * g_k_c * g_k1_c - g_k_c * g_k_c - 2.0 * g_k1_y)
        - k / math.pi * beta * (1.0 - g_2k_2c)
    )
    return np.abs(y - y_pos) + theta * inner


def crps_gtcnd(p: GtcndParams, y):
    """
    Closed-form CRPS of GTCND forecasts.

    Args:
        p: GTCND parameters (scalars or arrays).
        y: Observations, broadcast against the parameters.

    Returns:
        CRPS per forecast, unclipped.

    Raises:
        DomainError: If any observation is not finite.
    """
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DomainError("observation must be finite")
    return _out(gtcnd_crps_expr(p.L, p.mu, p.sigma, y))


def crps_csgd(p: CsgdParams, y):
    """Closed-form CRPS of CSGD forecasts; same contract as crps_gtcnd."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DomainError("observation must be finite")
    return _out(csgd_crps_expr(p.k, p.theta, p.delta, y))


def crps_parametric(p: GtcndParams | CsgdParams, y):
    """Dispatch on the parameter type."""
    return crps_gtcnd(p, y) if isinstance(p, GtcndParams) else crps_csgd(p, y)


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------


def _find_bracket(cdf: Callable, y: float, eps: float = 1e-12) -> tuple[float, float]:
    lo, width = y - 1.0, 1.0
    while cdf(lo) > eps:
        width *= 2.0
        lo = y - width
        if width > 1e12:
            raise QuadratureError("no lower bracket found", math.inf, eps)
    hi, width = y + 1.0, 1.0
    while 1.0 - cdf(hi) > eps:
        width *= 2.0
        hi = y + width
        if width > 1e12:
            raise QuadratureError("no upper bracket found", math.inf, eps)
    return lo, hi


def crps_numeric(
    cdf: Callable[[float], float],
    y: float,
    tol: float = 1e-10,
    *,
    quantile: Callable[[float], float] | None = None,
    bracket: tuple[float, float] | None = None,
    points: Sequence[float] = (),
    support_min: float | None = None,
) -> float:
    """
    Adaptive quadrature of ∫ (F(z) − 1{y ≤ z})² dz.

    The bracket is [min(y, q(1e-9)) − 1, max(y, q(1 − 1e-9)) + 1] when a
    quantile function is supplied, otherwise it is grown geometrically around
    y. The integral is split at y and at every extra point (kinks and jumps of
    F). Below support_min, F is known to vanish and that piece is added
    analytically as max(0, support_min − y).

    Raises QuadratureError when the summed error estimate exceeds
    tol·max(1, result).
    """
    if tol <= 0.0:
        raise DomainError("tol must be > 0")
    y = float(y)
    if not math.isfinite(y):
        raise DomainError("observation must be finite")

    if bracket is not None:
        lo, hi = (float(b) for b in bracket)
    elif quantile is not None:
        lo = min(y, float(quantile(1e-9))) - 1.0
        hi = max(y, float(quantile(1.0 - 1e-9))) + 1.0
    else:
        lo, hi = _find_bracket(cdf, y)

    analytic = 0.0
    if support_min is not None and lo < support_min:
        analytic = max(0.0, support_min - y)
        lo = float(support_min)
    if hi <= lo:
        return analytic

    def integrand(z: float) -> float:
        diff = float(cdf(z)) - (1.0 if y <= z else 0.0)
        return diff * diff

    cuts = sorted({lo, hi, *(float(p) for p in [y, *points] if lo < float(p) < hi)})
    total, error = analytic, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        result = integrate.quad(integrand, a, b, epsabs=0.1 * tol, epsrel=0.1 * tol, limit=500, full_output=1)
        value, abserr = result[0], result[1]
        if len(result) == 4:
            logger.debug("quad on [%g, %g]: %s", a, b, result[3])
        total += value
        error += abserr

    if error > tol * max(1.0, abs(total)):
        logger.warning("CRPS quadrature did not converge at y=%g (error %.3e)", y, error)
        raise QuadratureError("CRPS quadrature did not converge", error, tol)
    return total


def crps_quantile_integral(quantile: Callable[[float], float], y: float, *, break_levels: Sequence[float] = (), tol: float = 1e-10) -> float:
    """Pinball representation integrated over α ∈ (0, 1) by adaptive quadrature."""
    y = float(y)

    def integrand(alpha: float) -> float:
        return float(pinball(quantile(alpha), y, alpha))

    cuts = sorted({0.0, 1.0, *(float(b) for b in break_levels if 0.0 < b < 1.0)})
    total, error = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        value, abserr, *_ = integrate.quad(integrand, a, b, epsabs=0.1 * tol, epsrel=0.1 * tol, limit=500, full_output=1)
        total += value
        error += abserr
    if error > tol * max(1.0, abs(total)):
        raise QuadratureError("pinball quadrature did not converge", error, tol)
    return total


def crps_threshold_integral(cdf: Callable, y: float, thresholds) -> float:
    """
    Brier representation integrated by the trapezoid rule over a threshold grid.

    The grid is split at y so the jump of the indicator is integrated exactly;
    cdf must accept arrays.
    """
    y = float(y)
    t = np.unique(np.asarray(thresholds, dtype=np.float64))
    below = np.append(t[t < y], y) if np.any(t < y) else np.empty(0)
    above = np.insert(t[t > y], 0, y) if np.any(t > y) else np.empty(0)

    total = 0.0
    if below.size > 1:
        total += np.trapezoid(np.asarray(cdf(below), dtype=np.float64) ** 2, below)
    if above.size > 1:
        total += np.trapezoid((np.asarray(cdf(above), dtype=np.float64) - 1.0) ** 2, above)
    return float(total)


# ---------------------------------------------------------------------------
# Ensembles and quantiles
# ---------------------------------------------------------------------------


def _ensemble_terms(members, y) -> tuple[np.ndarray, np.ndarray, int]:
    """Σ|xᵢ − y| and ΣᵢΣⱼ|xᵢ − xⱼ| along the last axis, the latter from the sorted identity."""
    x = np.sort(np.asarray(members, dtype=np.float64), axis=-1)
    m = x.shape[-1]
    if m < 1:
        raise DomainError("ensemble must have at least one member")
    y = np.asarray(y, dtype=np.float64)
    abs_err = np.sum(np.abs(x - y[..., None]), axis=-1)
    weights = 2.0 * np.arange(1, m + 1) - m - 1
    pair_sum = 2.0 * np.sum(weights * x, axis=-1)
    return abs_err, pair_sum, m


def crps_ensemble_fair(members, y):
    """
    Fair (unbiased) ensemble CRPS.

    Args:
        members: Ensemble values with members along the last axis (m ≥ 2).
        y: Observations matching the leading axes.

    Returns:
        Σ|xᵢ − y|/m − ΣᵢΣⱼ|xᵢ − xⱼ|/(2m(m − 1)) per forecast.
    """
    members = np.asarray(members, dtype=np.float64)
    if members.ndim == 0 or members.shape[-1] < 2:
        raise DomainError("fair CRPS needs at least two members")
    abs_err, pair_sum, m = _ensemble_terms(members, y)
    return _out(abs_err / m - pair_sum / (2.0 * m * (m - 1)))


def crps_ensemble_nrg(members, y):
    """Kernel (NRG) ensemble CRPS, the CRPS of the empirical distribution."""
    members = np.asarray(members, dtype=np.float64)
    if members.ndim == 0 or members.shape[-1] < 1:
        raise DomainError("ensemble must have at least one member")
    abs_err, pair_sum, m = _ensemble_terms(members, y)
    return _out(np.maximum(abs_err / m - pair_sum / (2.0 * m * m), 0.0))


def pinball(q, y, alpha):
    """2(1{y ≤ q} − α)(q − y)."""
    q = np.asarray(q, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return _out(2.0 * ((y <= q).astype(np.float64) - alpha) * (q - y))


def crps_from_quantiles(forecast: QuantileForecast, y):
    """
    Quantile-score CRPS: the mean pinball loss over the forecast's level grid.

    Args:
        forecast: Quantile forecast, levels along the last axis.
        y: Observations matching forecast.shape.

    Raises:
        DomainError: If forecast is not a QuantileForecast.
    """
    if not isinstance(forecast, QuantileForecast):
        raise DomainError("crps_from_quantiles expects a QuantileForecast")
    y = np.asarray(y, dtype=np.float64)
    losses = pinball(forecast.values, y[..., None], forecast.levels)
    return _out(np.mean(losses, axis=-1))


# ---------------------------------------------------------------------------
# Skill and aggregation
# ---------------------------------------------------------------------------


def skill_score(mean_s, mean_s_ref):
    """(ref − s)/ref; NaN wherever the reference score is zero."""
    s = np.asarray(mean_s, dtype=np.float64)
    ref = np.asarray(mean_s_ref, dtype=np.float64)
    safe = np.where(ref != 0.0, ref, 1.0)
    return _out(np.where(ref != 0.0, (ref - s) / safe, np.nan))


def brier_exceedance(F_at_t, y, t):
    """(F(t) − 1{y ≤ t})²."""
    F = np.asarray(F_at_t, dtype=np.float64)
    indicator = (np.asarray(y, dtype=np.float64) <= np.asarray(t, dtype=np.float64)).astype(np.float64)
    return _out((F - indicator) ** 2)


def summarize(per_point, mask=None, keep_points: bool = True) -> ScoreSummary:
    """Mean over (masked) points with compensated summation."""
    values = np.asarray(per_point, dtype=np.float64)
    if mask is not None:
        values = values[np.broadcast_to(np.asarray(mask, dtype=bool), values.shape)]
    values = values.ravel()
    if values.size == 0:
        raise DomainError("cannot summarize an empty score set")
    mean = math.fsum(values.tolist()) / values.size
    return ScoreSummary(mean_score=mean, n=int(values.size), per_point=values if keep_points else None)
