"""
Threshold-exceedance probabilities and ROC curves.

A forecast says "yes" when its exceedance probability is ≥ a decision
threshold. Sweeping every distinct probability from the highest down gives
(false alarm rate, hit rate) points from (0, 0) to (1, 1); the AUC is the
trapezoidal area under them.
"""

from dataclasses import dataclass
from functools import singledispatch

import numpy as np

from ..distributions import CsgdParams, GtcndParams, csgd_cdf, gtcnd_cdf
from ..errors import DomainError
from ..fitting.quantiles import QuantileForecast


@dataclass
class RocCurve:
    false_alarm_rate: np.ndarray
    hit_rate: np.ndarray
    thresholds: np.ndarray
    auc: float


def _check_threshold(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if np.any(~(t >= 0.0)):
        raise DomainError("exceedance threshold must be >= 0")
    return t


@singledispatch
def exceedance_prob(forecast, t):
    """P(X > t); a plain array is read as ensemble members on the last axis."""
    t = _check_threshold(t)
    members = np.asarray(forecast, dtype=np.float64)
    return np.mean(members > t[..., None], axis=-1)


@exceedance_prob.register
def _(forecast: GtcndParams, t):
    return 1.0 - gtcnd_cdf(forecast, _check_threshold(t))


@exceedance_prob.register
def _(forecast: CsgdParams, t):
    return 1.0 - csgd_cdf(forecast, _check_threshold(t))


@exceedance_prob.register
def _(forecast: QuantileForecast, t):
    return forecast.exceedance(_check_threshold(t))


def roc_curve(probs, events) -> RocCurve:
    """Pooled ROC curve over all supplied (probability, event) pairs."""
    probs = np.asarray(probs, dtype=np.float64).ravel()
    events = np.asarray(events).ravel()
    if probs.size != events.size:
        raise DomainError(f"probs ({probs.size}) and events ({events.size}) differ in length")
    if not np.all((events == 0) | (events == 1)):
        raise DomainError("events must be 0 or 1")
    events = events.astype(bool)
    n_events = int(events.sum())
    n_non = events.size - n_events
    if n_events == 0 or n_non == 0:
        raise DomainError("ROC needs at least one event and one non-event")

    order = np.argsort(-probs, kind="stable")
    p_sorted = probs[order]
    hits = np.cumsum(events[order])
    false_alarms = np.cumsum(~events[order])
    # last index of each run of equal probabilities
    ends = np.flatnonzero(np.append(np.diff(p_sorted) != 0.0, True))

    hit_rate = np.concatenate([[0.0], hits[ends] / n_events])
    far = np.concatenate([[0.0], false_alarms[ends] / n_non])
    thresholds = np.concatenate([[np.inf], p_sorted[ends]])
    return RocCurve(far, hit_rate, thresholds, float(np.trapezoid(hit_rate, far)))


def roc_auc_per_point(probs, events) -> np.ndarray:
    """AUC of each grid point from (n_days, H, W) inputs; NaN where events are degenerate."""
    probs = np.asarray(probs, dtype=np.float64)
    events = np.asarray(events)
    if probs.ndim != 3 or probs.shape != events.shape:
        raise DomainError("probs and events must both be (n_days, H, W)")
    _, H, W = probs.shape
    auc = np.full((H, W), np.nan)
    for i in range(H):
        for j in range(W):
            e = events[:, i, j]
            if 0 < e.sum() < e.size:
                auc[i, j] = roc_curve(probs[:, i, j], e).auc
    return auc
