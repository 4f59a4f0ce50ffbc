"""
Network layers on (batch, height, width, channels) tensors.

Convolutions are cross-correlations with 3×3 kernels and same padding
(zero-filled borders), computed as a sum over the nine kernel shifts.
Batch normalization is composed from autodiff primitives; the rest are
primitives with hand-written backward closures.
"""

import numpy as np

from ..errors import DomainError
from . import autodiff as ad
from .autodiff import Tensor, as_tensor

BN_EPS = 1e-3
BN_MOMENTUM = 0.99
PARAM_FLOOR = 1e-3

_SHIFTS = [(di, dj) for di in range(3) for dj in range(3)]


def _check_4d(x: Tensor, what: str) -> None:
    if x.ndim != 4:
        raise DomainError(f"{what} expects a (batch, height, width, channels) tensor, got shape {x.shape}")


def depthwise_conv3x3(x, kernel) -> Tensor:
    """Per-channel 3×3 convolution; kernel shape (3, 3, C)."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    _check_4d(x, "depthwise_conv3x3")
    B, H, W, C = x.shape
    if kernel.shape != (3, 3, C):
        raise DomainError(f"depthwise kernel must be (3, 3, {C}), got {kernel.shape}")
    xp = np.pad(x.data, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.zeros((B, H, W, C))
    for di, dj in _SHIFTS:
        out += xp[:, di:di + H, dj:dj + W, :] * kernel.data[di, dj]

    def backward(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros((3, 3, C))
        for di, dj in _SHIFTS:
            gxp[:, di:di + H, dj:dj + W, :] += g * kernel.data[di, dj]
            gk[di, dj] = np.sum(xp[:, di:di + H, dj:dj + W, :] * g, axis=(0, 1, 2))
        x.accumulate(gxp[:, 1:-1, 1:-1, :])
        kernel.accumulate(gk)

    return Tensor(out, (x, kernel), backward)


def pointwise_conv(x, kernel, bias=None) -> Tensor:
    """1×1 convolution; kernel shape (C_in, C_out)."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    _check_4d(x, "pointwise_conv")
    if kernel.ndim != 2 or kernel.shape[0] != x.shape[-1]:
        raise DomainError(f"pointwise kernel must be ({x.shape[-1]}, C_out), got {kernel.shape}")
    out = ad.matmul_last(x, kernel)
    return out if bias is None else out + bias


def separable_conv2d(x, depthwise, pointwise) -> Tensor:
    """Depthwise 3×3 followed by pointwise 1×1, same padding."""
    return pointwise_conv(depthwise_conv3x3(x, depthwise), pointwise)


def conv2d(x, kernel) -> Tensor:
    """Standard 3×3 convolution; kernel shape (3, 3, C_in, C_out)."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    _check_4d(x, "conv2d")
    B, H, W, C = x.shape
    if kernel.ndim != 4 or kernel.shape[:3] != (3, 3, C):
        raise DomainError(f"conv kernel must be (3, 3, {C}, C_out), got {kernel.shape}")
    c_out = kernel.shape[3]
    xp = np.pad(x.data, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.zeros((B, H, W, c_out))
    for di, dj in _SHIFTS:
        out += xp[:, di:di + H, dj:dj + W, :] @ kernel.data[di, dj]

    def backward(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(kernel.data)
        g2 = g.reshape(-1, c_out)
        for di, dj in _SHIFTS:
            gxp[:, di:di + H, dj:dj + W, :] += g @ kernel.data[di, dj].T
            gk[di, dj] = xp[:, di:di + H, dj:dj + W, :].reshape(-1, C).T @ g2
        x.accumulate(gxp[:, 1:-1, 1:-1, :])
        kernel.accumulate(gk)

    return Tensor(out, (x, kernel), backward)


def batch_norm(x, scale, offset, running_mean, running_var, mode: str = "train", momentum: float = BN_MOMENTUM, eps: float = BN_EPS):
    """
    Per-channel batch normalization.

    Modes:
        train: batch statistics, running statistics updated
        batch: batch statistics, running statistics left as they are
        infer: running statistics

    Returns (output, (running_mean, running_var)); inputs are never mutated.
    """
    x = as_tensor(x)
    _check_4d(x, "batch_norm")
    running_mean = np.asarray(running_mean, dtype=np.float64)
    running_var = np.asarray(running_var, dtype=np.float64)
    if mode == "infer":
        xhat = (x - running_mean) / np.sqrt(running_var + eps)
        return xhat * scale + offset, (running_mean, running_var)
    if mode not in ("train", "batch"):
        raise DomainError(f"unknown batch-norm mode: {mode}")

    mu = ad.mean(x, axis=(0, 1, 2), keepdims=True)
    centered = x - mu
    var = ad.mean(centered * centered, axis=(0, 1, 2), keepdims=True)
    xhat = centered / ad.sqrt(var + eps)
    out = xhat * scale + offset
    if mode == "batch":
        return out, (running_mean, running_var)
    new_mean = momentum * running_mean + (1.0 - momentum) * mu.data.ravel()
    new_var = momentum * running_var + (1.0 - momentum) * var.data.ravel()
    return out, (new_mean, new_var)


def relu(x) -> Tensor:
    return ad.relu(x)


def max_pool2d(x) -> Tensor:
    """2×2 max pooling with stride 2; ties go to the first element in row-major order."""
    x = as_tensor(x)
    _check_4d(x, "max_pool2d")
    B, H, W, C = x.shape
    if H % 2 or W % 2:
        raise DomainError(f"max_pool2d needs even spatial dims, got {H}x{W}")
    h, w = H // 2, W // 2
    windows = x.data.reshape(B, h, 2, w, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(B, h, w, C, 4)
    arg = np.argmax(windows, axis=-1)[..., None]
    out = np.take_along_axis(windows, arg, axis=-1)[..., 0]

    def backward(g):
        gw = np.zeros_like(windows)
        np.put_along_axis(gw, arg, g[..., None], axis=-1)
        x.accumulate(gw.reshape(B, h, w, C, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(B, H, W, C))

    return Tensor(out, (x,), backward)


def upsample_matrix(n: int) -> np.ndarray:
    """(2n, n) linear interpolation weights, half-pixel centers, edges clamped."""
    U = np.zeros((2 * n, n))
    if n == 1:
        U[:, 0] = 1.0
        return U
    src = np.clip((np.arange(2 * n) + 0.5) / 2.0 - 0.5, 0.0, n - 1.0)
    i0 = np.minimum(np.floor(src).astype(np.intp), n - 2)
    frac = src - i0
    rows = np.arange(2 * n)
    U[rows, i0] = 1.0 - frac
    U[rows, i0 + 1] += frac
    return U


def bilinear_upsample(x) -> Tensor:
    """Double height and width by bilinear interpolation."""
    x = as_tensor(x)
    _check_4d(x, "bilinear_upsample")
    _, H, W, _ = x.shape
    Uh, Uw = upsample_matrix(H), upsample_matrix(W)
    out = np.einsum("ih,bhwc,jw->bijc", Uh, x.data, Uw, optimize=True)
    return Tensor(out, (x,), lambda g: x.accumulate(np.einsum("ih,bijc,jw->bhwc", Uh, g, Uw, optimize=True)))


def concat_channels(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != b.ndim or a.shape[:-1] != b.shape[:-1]:
        raise DomainError(f"cannot concatenate channels of {a.shape} and {b.shape}")
    return ad.concat([a, b], axis=-1)


def link_params(raw, family: str, floor: float = PARAM_FLOOR, upper_bound: float | None = None) -> Tensor:
    """
    Map raw 3-channel outputs to valid parameter fields.

    gtcnd: L = logistic(r0), μ = r1, σ = softplus(r2) + floor
    csgd:  k = softplus(r0) + floor, θ = softplus(r1) + floor, δ = −softplus(r2) − floor

    upper_bound optionally caps σ (gtcnd) or θ (csgd).
    """
    raw = as_tensor(raw)
    if raw.shape[-1] != 3:
        raise DomainError(f"link_params expects 3 channels, got {raw.shape[-1]}")
    r0, r1, r2 = raw[..., 0], raw[..., 1], raw[..., 2]
    if family == "gtcnd":
        scale = ad.softplus(r2) + floor
        if upper_bound is not None:
            scale = ad.minimum(scale, upper_bound)
        return ad.stack_last([ad.logistic(r0), r1, scale])
    if family == "csgd":
        scale = ad.softplus(r1) + floor
        if upper_bound is not None:
            scale = ad.minimum(scale, upper_bound)
        return ad.stack_last([ad.softplus(r0) + floor, scale, -ad.softplus(r2) - floor])
    raise DomainError(f"unknown family: {family}")
