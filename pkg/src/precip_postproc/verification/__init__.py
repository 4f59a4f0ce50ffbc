"""
Calibration and discrimination diagnostics.

Modules:
- ranks: observation ranks with randomized ties, rank histograms, JPZ flatness test
- roc: exceedance probabilities of any forecast type, ROC curves and AUC
- skill: CRPSS maps and censor masks
"""

from .ranks import (
    JpzResult,
    RankHistogram,
    jpz_rejection_map,
    jpz_test,
    observation_rank,
    observation_ranks,
    rank_histogram,
)
from .roc import RocCurve, exceedance_prob, roc_auc_per_point, roc_curve
from .skill import CrpssMap, censor_mask, crpss_map

__all__ = [
    "CrpssMap",
    "JpzResult",
    "RankHistogram",
    "RocCurve",
    "censor_mask",
    "crpss_map",
    "exceedance_prob",
    "jpz_rejection_map",
    "jpz_test",
    "observation_rank",
    "observation_ranks",
    "rank_histogram",
    "roc_auc_per_point",
    "roc_curve",
]
