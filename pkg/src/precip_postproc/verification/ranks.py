"""
Rank histograms and the JPZ flatness test.

An observation's rank among n forecast values is 1 + the number of values
below it, plus a uniform draw over the tied positions (so a dry observation
among dry quantiles is spread evenly over the tied ranks). Ranks 1..n+1 are
grouped into equal-width classes.

The flatness test projects the standardized deviations
(observed − expected)/√expected onto orthonormal contrasts for bias (linear),
dispersion (symmetric V) and a wave (one-period cosine); each squared
projection is χ²(1) under flatness and the three p-values are combined with a
Bonferroni correction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from ..errors import DomainError
from ..fitting.quantiles import QuantileForecast

N_RANKS = 108
N_CLASSES = 18
MIN_EXPECTED = 5


@dataclass
class RankHistogram:
    counts: np.ndarray
    n_ranks: int

    @property
    def n_total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return self.counts.size

    def merge(self, other: "RankHistogram") -> "RankHistogram":
        if other.n_ranks != self.n_ranks or other.n_classes != self.n_classes:
            raise DomainError("cannot merge histograms with different binning")
        return RankHistogram(self.counts + other.counts, self.n_ranks)


@dataclass
class JpzResult:
    bias: float
    dispersion: float
    wave: float
    p_values: tuple[float, float, float]
    adjusted_p_values: tuple[float, float, float]
    reject_flatness: bool
    alpha: float
    residual: float
    residual_df: int


def _values(forecast) -> np.ndarray:
    return forecast.values if isinstance(forecast, QuantileForecast) else np.asarray(forecast, dtype=np.float64)


def observation_ranks(forecast, y, rng: np.random.Generator) -> np.ndarray:
    """Ranks (1..n+1) of y among the forecast values on the last axis, ties randomized."""
    values = _values(forecast)
    y = np.asarray(y, dtype=np.float64)
    below = np.sum(values < y[..., None], axis=-1)
    equal = np.sum(values == y[..., None], axis=-1)
    return below + 1 + rng.integers(0, equal + 1)


def observation_rank(q, y: float, rng: np.random.Generator) -> int:
    return int(observation_ranks(q, y, rng))


def rank_histogram(ranks, n_ranks: int = N_RANKS, n_classes: int = N_CLASSES) -> RankHistogram:
    """Group ranks 1..n_ranks into n_classes consecutive classes of equal width."""
    if n_ranks % n_classes:
        raise DomainError(f"{n_ranks} ranks cannot be split into {n_classes} equal classes")
    ranks = np.asarray(ranks).ravel()
    if ranks.size and (ranks.min() < 1 or ranks.max() > n_ranks):
        raise DomainError(f"ranks must lie in 1..{n_ranks}")
    width = n_ranks // n_classes
    counts = np.bincount((ranks.astype(np.intp) - 1) // width, minlength=n_classes)
    return RankHistogram(counts.astype(np.int64), n_ranks)


def jpz_contrasts(n_classes: int) -> np.ndarray:
    """(n_classes, 3) orthonormal bias/dispersion/wave contrasts, all orthogonal to the constant."""
    i = np.arange(1, n_classes + 1, dtype=np.float64)
    centered = i - (n_classes + 1) / 2.0
    basis = np.column_stack([
        np.ones(n_classes),
        centered,
        np.abs(centered),
        np.cos(2.0 * np.pi * (i - 0.5) / n_classes),
    ])
    q, r = np.linalg.qr(basis)
    q = q * np.sign(np.diag(r))
    return q[:, 1:]


def jpz_test(h: RankHistogram, alpha: float = 0.05) -> JpzResult:
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    K = h.n_classes
    if K < 5:
        raise DomainError("the flatness test needs at least 5 classes")
    if h.n_total < MIN_EXPECTED * K:
        raise DomainError(f"need at least {MIN_EXPECTED * K} ranks for {K} classes, got {h.n_total}")

    expected = h.n_total / K
    dev = (h.counts - expected) / np.sqrt(expected)
    stats = (jpz_contrasts(K).T @ dev) ** 2
    p = chi2.sf(stats, df=1)
    adjusted = np.minimum(1.0, 3.0 * p)
    total = float(dev @ dev)
    return JpzResult(
        bias=float(stats[0]),
        dispersion=float(stats[1]),
        wave=float(stats[2]),
        p_values=tuple(float(v) for v in p),
        adjusted_p_values=tuple(float(v) for v in adjusted),
        reject_flatness=bool(np.any(adjusted < alpha)),
        alpha=alpha,
        residual=max(0.0, total - float(stats.sum())),
        residual_df=K - 4,
    )


def jpz_rejection_map(ranks, n_ranks: int = N_RANKS, n_classes: int = N_CLASSES, alpha: float = 0.05) -> np.ndarray:
    """Per-point flatness rejection from (n_days, H, W) ranks."""
    ranks = np.asarray(ranks)
    if ranks.ndim != 3:
        raise DomainError("ranks must be (n_days, H, W)")
    _, H, W = ranks.shape
    reject = np.zeros((H, W), dtype=bool)
    for i in range(H):
        for j in range(W):
            reject[i, j] = jpz_test(rank_histogram(ranks[:, i, j], n_ranks, n_classes), alpha).reject_flatness
    return reject
