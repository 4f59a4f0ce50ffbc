"""CRPS loss on parameter fields and gradient collection."""

import numpy as np

from ..errors import DomainError
from ..scoring.crps import csgd_crps_expr, gtcnd_crps_expr
from . import autodiff as ad
from .autodiff import AUTODIFF_OPS, Tensor, as_tensor
from .unet import ForwardPass, ModelParams


def crps_field(param_fields, obs, family: str) -> Tensor:
    """Pointwise closed-form CRPS of (..., 3) parameter fields against obs (...)."""
    fields = as_tensor(param_fields)
    if fields.shape[-1] != 3:
        raise DomainError(f"parameter fields need 3 channels, got {fields.shape[-1]}")
    a, b, c = fields[..., 0], fields[..., 1], fields[..., 2]
    if family == "gtcnd":
        return gtcnd_crps_expr(a, b, c, obs, AUTODIFF_OPS)
    if family == "csgd":
        return csgd_crps_expr(a, b, c, obs, AUTODIFF_OPS)
    raise DomainError(f"unknown family: {family}")


def crps_loss(param_fields, obs, family: str, mask=None) -> Tensor:
    """
    Mean closed-form CRPS over unmasked grid points.

    Args:
        param_fields: (B, H, W, 3) tensor or array.
        obs: (B, H, W) or (B, H, W, 1) observations.
        mask: optional (H, W) or (B, H, W) boolean field, True = scored.
    """
    fields = as_tensor(param_fields)
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim == fields.ndim and obs.shape[-1] == 1:
        obs = obs[..., 0]
    if obs.shape != fields.shape[:-1]:
        raise DomainError(f"observations {obs.shape} do not match parameter fields {fields.shape[:-1]}")
    keep = np.ones(obs.shape, dtype=bool) if mask is None else np.broadcast_to(np.asarray(mask, dtype=bool), obs.shape)
    if not keep.any():
        raise DomainError("mask excludes every grid point")

    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        score = crps_field(fields, obs, family)
    bad = keep & ~np.isfinite(score.data)
    if bad.any():
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DomainError(f"non-finite CRPS at grid point {where}")
    return ad.mean(score[np.nonzero(keep)])


def backward(store: ModelParams, forward: ForwardPass, loss: Tensor) -> np.ndarray:
    """Backpropagate `loss` and return gradients aligned with store.values."""
    loss.backward()
    return store.flatten({name: leaf.grad for name, leaf in forward.leaves.items()})
