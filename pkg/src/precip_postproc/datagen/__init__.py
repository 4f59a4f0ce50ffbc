"""
Synthetic data with known conditional truth.

Modules:
- synthetic: constant fields, latent-driven truth parameters, observations, miscalibrated raw ensembles, dataset builder
"""

from .synthetic import (
    SyntheticConfig,
    build_dataset,
    ensemble_summaries,
    gen_constant_fields,
    gen_latent,
    gen_truth_params,
    predictor_count,
    sample_obs,
    sample_raw_ensemble,
)

__all__ = [
    "SyntheticConfig",
    "build_dataset",
    "ensemble_summaries",
    "gen_constant_fields",
    "gen_latent",
    "gen_truth_params",
    "predictor_count",
    "sample_obs",
    "sample_raw_ensemble",
]
