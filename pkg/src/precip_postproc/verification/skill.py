"""
CRPSS maps with censoring.

Per-point skill compares day-averaged scores; the regional value is the skill
of the masked-mean scores, not the mean of per-point skills.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..scoring.crps import skill_score, summarize


@dataclass
class CrpssMap:
    skill: np.ndarray
    mean_score: float
    mean_ref_score: float
    masked_skill: float
    n_points: int


def censor_mask(land_sea_mask, border: int = 2) -> np.ndarray:
    """Land points at least `border` cells away from the grid edge (True = scored)."""
    land = np.asarray(land_sea_mask) > 0.5
    if border < 0:
        raise DomainError("border must be >= 0")
    interior = np.zeros_like(land)
    H, W = land.shape
    if 2 * border < H and 2 * border < W:
        interior[border:H - border, border:W - border] = True
    return land & interior


def crpss_map(scores, scores_ref, mask=None) -> CrpssMap:
    """
    Args:
        scores, scores_ref: (H, W) mean scores or (n_days, H, W) daily scores.
        mask: (H, W) boolean field, True = included (default: every point).
    """
    s = np.asarray(scores, dtype=np.float64)
    ref = np.asarray(scores_ref, dtype=np.float64)
    if s.shape != ref.shape:
        raise DomainError(f"score grids differ: {s.shape} vs {ref.shape}")
    if s.ndim == 3:
        s, ref = s.mean(axis=0), ref.mean(axis=0)
    if s.ndim != 2:
        raise DomainError("scores must be (H, W) or (n_days, H, W)")
    mask = np.ones(s.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != s.shape:
        raise DomainError(f"mask {mask.shape} does not match grid {s.shape}")

    skill = skill_score(s, ref)
    mean_s = summarize(s, mask, keep_points=False).mean_score
    mean_ref = summarize(ref, mask, keep_points=False).mean_score
    return CrpssMap(skill, mean_s, mean_ref, float(skill_score(mean_s, mean_ref)), int(mask.sum()))
