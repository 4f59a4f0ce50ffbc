"""
Distributional regression U-Net on gridded predictors.

Modules:
- autodiff: reverse-mode differentiation over numpy arrays (Tensor and ops)
- layers: separable/standard 3×3 convolutions, batch norm, pooling, bilinear upsampling, output links
- unet: UNetConfig, the flat ModelParams store and the two-level forward pass
- loss: closed-form CRPS loss on parameter fields and gradient collection
- train: Adam training, multi-model training on a process pool, quantile aggregation
"""

from .layers import link_params
from .loss import backward, crps_loss
from .train import (
    Adam,
    TrainConfig,
    TrainingData,
    TrainResult,
    ensemble_aggregate,
    train,
    train_ensemble,
)
from .unet import ModelParams, UNetConfig, UNetModel, init_model, predict_params, unet_forward

__all__ = [
    "Adam",
    "ModelParams",
    "TrainConfig",
    "TrainResult",
    "TrainingData",
    "UNetConfig",
    "UNetModel",
    "backward",
    "crps_loss",
    "ensemble_aggregate",
    "init_model",
    "link_params",
    "predict_params",
    "train",
    "train_ensemble",
    "unet_forward",
]
