"""
Moments-method inference for the GTCND and CSGD families.

GTCND: L is the dry fraction; the continuous part is a zero-truncated normal
whose squared coefficient of variation depends on α = −μ/σ only,

    CV²(α) = (1 + αλ − λ²) / (λ − α)²,   λ = φ(α)/(1 − Φ(α)),

which increases from 0 (α → −∞) to 1 (α → ∞). A bracketed 1-D root for α
fixes the shape; the mean then fixes σ = mean/(λ − α) and μ = −ασ.

CSGD: the moment ratios m2/m1² and m3/m1³ are scale free and depend on
(k, c̃) only. They are matched by Levenberg–Marquardt in (log k, log c̃) from a
few starting points, then θ follows from m1.

Fits never raise on infeasible moments; they return a FitResult with
success=False so a batch can fall back point by point.
"""

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import special
from scipy.optimize import brentq, least_squares

from ..distributions import CsgdParams, GtcndParams, csgd_moments, gtcnd_mean, gtcnd_var
from ..distributions.gtcnd import inverse_mills
from ..errors import DomainError
from .quantiles import QuantileForecast

logger = logging.getLogger(__name__)

GTCND_ROUNDTRIP_TOL = 1e-6
CSGD_ROUNDTRIP_TOL = 1e-8
ALPHA_MAX = 25.0
DRY_SENTINEL = GtcndParams(1.0, 0.0, 1.0)

_CSGD_STARTS = [(k0, c0) for k0 in (0.5, 1.0, 2.0, 4.0) for c0 in (0.01, 0.2, 1.0)]
_LOG_CLIP = 30.0


@dataclass
class FitResult:
    params: GtcndParams | CsgdParams | None
    success: bool
    message: str
    residual: float = float("nan")
    diagnostics: dict = field(default_factory=dict)


def empirical_moments(q: QuantileForecast):
    """Dry fraction and raw moments of the quantile values as an equiprobable sample."""
    v = q.values
    dry = np.mean(v == 0.0, axis=-1)
    m1 = np.mean(v, axis=-1)
    m2 = np.mean(v * v, axis=-1)
    m3 = np.mean(v * v * v, axis=-1)
    out = [x[()] if np.ndim(x) == 0 else x for x in (dry, m1, m2, m3)]
    return tuple(out)


# ---------------------------------------------------------------------------
# GTCND
# ---------------------------------------------------------------------------


def _truncnorm_cv2(alpha: float) -> float:
    lam = float(inverse_mills(np.float64(alpha)))
    return (1.0 + alpha * lam - lam * lam) / (lam - alpha) ** 2


def fit_gtcnd(dry_frac: float, m1: float, m2: float) -> FitResult:
    dry_frac, m1, m2 = float(dry_frac), float(m1), float(m2)
    if not (0.0 <= dry_frac <= 1.0):
        raise DomainError("dry_frac must lie in [0, 1]")
    if not (np.isfinite(m1) and np.isfinite(m2)):
        raise DomainError("moments must be finite")
    diag = {"dry_frac": dry_frac, "m1": m1, "m2": m2}

    if dry_frac == 1.0:
        return FitResult(DRY_SENTINEL, True, "dry point mass", 0.0, diag)

    keep = 1.0 - dry_frac
    mean_t = m1 / keep
    var_t = m2 / keep - mean_t * mean_t
    if mean_t <= 0.0 or var_t <= 0.0:
        return FitResult(None, False, f"no sigma > 0 solves mean={mean_t:.6g}, var={var_t:.6g}", diagnostics=diag)

    cv2 = var_t / (mean_t * mean_t)
    diag["cv2"] = cv2
    alpha_lo = -2.0 / np.sqrt(cv2) - 5.0
    if cv2 >= _truncnorm_cv2(ALPHA_MAX) or cv2 <= _truncnorm_cv2(alpha_lo):
        return FitResult(None, False, f"var/mean^2 = {cv2:.6g} outside attainable range", diagnostics=diag)

    alpha = brentq(lambda a: _truncnorm_cv2(a) - cv2, alpha_lo, ALPHA_MAX, xtol=1e-14, rtol=1e-15, maxiter=300)
    lam = float(inverse_mills(np.float64(alpha)))
    sigma = mean_t / (lam - alpha)
    mu = -alpha * sigma
    params = GtcndParams(dry_frac, mu, sigma)

    fit_m1 = float(gtcnd_mean(params))
    fit_m2 = float(gtcnd_var(params)) + fit_m1 * fit_m1
    residual = max(abs(fit_m1 / m1 - 1.0), abs(fit_m2 / m2 - 1.0))
    diag["alpha"] = alpha
    if residual > GTCND_ROUNDTRIP_TOL:
        return FitResult(params, False, f"moment residual {residual:.3e} above tolerance", residual, diag)
    return FitResult(params, True, "OK", residual, diag)


# ---------------------------------------------------------------------------
# CSGD
# ---------------------------------------------------------------------------


def _unit_moments(k: float, c: float) -> np.ndarray:
    """E[max(0, Z − c)ⁿ], n = 1..3, for Z ~ Gamma(k, 1)."""
    out = np.empty(3)
    for n in (1, 2, 3):
        total, rising = 0.0, 1.0
        for j in range(n + 1):
            if j > 0:
                rising *= k + j - 1
            total += comb(n, j) * (-c) ** (n - j) * rising * special.gammaincc(k + j, c)
        out[n - 1] = total
    return out


def _ratio_residuals(x: np.ndarray, t2: float, t3: float) -> np.ndarray:
    k, c = np.exp(np.clip(x, -_LOG_CLIP, _LOG_CLIP))
    M1, M2, M3 = _unit_moments(k, c)
    if not (M1 > 0.0 and np.isfinite(M2) and np.isfinite(M3)):
        return np.array([1e6, 1e6])
    return np.array([M2 / (M1 * M1) / t2 - 1.0, M3 / M1**3 / t3 - 1.0])


def _csgd_candidate(k: float, c: float, m1: float) -> CsgdParams | None:
    M1 = _unit_moments(k, c)[0]
    if not (M1 > 0.0 and np.isfinite(M1)):
        return None
    theta = m1 / M1
    try:
        return CsgdParams(k, theta, -c * theta)
    except DomainError:
        return None


def _relative_residual(params: CsgdParams, target: np.ndarray) -> float:
    fitted = np.array([float(m) for m in csgd_moments(params)])
    return float(np.max(np.abs(fitted / target - 1.0)))


def fit_csgd(m1: float, m2: float, m3: float) -> FitResult:
    m1, m2, m3 = float(m1), float(m2), float(m3)
    diag = {"m1": m1, "m2": m2, "m3": m3}
    if not (np.isfinite(m1) and np.isfinite(m2) and np.isfinite(m3)):
        return FitResult(None, False, "moments must be finite", diagnostics=diag)
    if m1 <= 0.0 or m2 <= m1 * m1:
        return FitResult(None, False, f"infeasible variance (m2 - m1^2 = {m2 - m1 * m1:.6g})", diagnostics=diag)

    t2, t3 = m2 / (m1 * m1), m3 / m1**3
    target = np.array([m1, m2, m3])
    candidates: list[tuple[float, CsgdParams]] = []

    # uncensored gamma limit: matches t2 exactly with c̃ → 0
    k_gamma = 1.0 / (t2 - 1.0)
    if np.isfinite(k_gamma):
        p = _csgd_candidate(k_gamma, 1e-12, m1)
        if p is not None:
            candidates.append((_relative_residual(p, target), p))

    evaluations = 0
    for k0, c0 in _CSGD_STARTS:
        sol = least_squares(
            _ratio_residuals,
            np.log([k0, c0]),
            args=(t2, t3),
            method="lm",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=2000,
        )
        evaluations += sol.nfev
        k, c = np.exp(np.clip(sol.x, -_LOG_CLIP, _LOG_CLIP))
        p = _csgd_candidate(float(k), float(c), m1)
        if p is not None:
            candidates.append((_relative_residual(p, target), p))

    diag["evaluations"] = evaluations
    if not candidates:
        return FitResult(None, False, "no admissible CSGD parameters found", diagnostics=diag)

    residual, best = min(candidates, key=lambda rp: rp[0])
    if not residual <= CSGD_ROUNDTRIP_TOL:
        return FitResult(best, False, f"no convergence (moment residual {residual:.3e})", residual, diag)
    return FitResult(best, True, "OK", residual, diag)


def fit_moments(family: str, dry_frac: float, m1: float, m2: float, m3: float) -> FitResult:
    """Dispatch on family; the CSGD ignores the dry fraction (it is implied by k and c̃)."""
    if family == "gtcnd":
        return fit_gtcnd(dry_frac, m1, m2)
    if family == "csgd":
        if dry_frac == 1.0:
            return FitResult(None, False, "all-dry sample has no CSGD moments fit")
        return fit_csgd(m1, m2, m3)
    raise DomainError(f"unknown family: {family}")
