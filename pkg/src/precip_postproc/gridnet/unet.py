"""
Two-level distributional regression U-Net.

    enc1 (c) ─────────────────────────────┐
      └ pool → enc2 (2c) ────────────┐    │
                 └ pool → bottleneck (4c)  │
                           └ up ⊕ enc2 → dec2 (2c)
                                        └ up ⊕ enc1 → dec1 (c) → 1×1 conv → link

Every block is conv → batch norm → ReLU, with separable or standard 3×3
convolutions. Inputs are standardized with per-channel statistics stored in
the model, zero-padded to a multiple of 4 and the output cropped back.

Parameters live in one flat vector (ModelParams.values) with named views, so
optimizers and checkpoints handle a single array.
"""

from dataclasses import dataclass, field

import numpy as np

from ..distributions import FAMILIES
from ..errors import DomainError
from . import autodiff as ad
from .autodiff import Tensor
from .layers import (
    PARAM_FLOOR,
    batch_norm,
    bilinear_upsample,
    concat_channels,
    conv2d,
    link_params,
    max_pool2d,
    pointwise_conv,
    relu,
    separable_conv2d,
)

DEPTH = 2
MULTIPLE = 2**DEPTH


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int
    base_channels: int = 8
    family: str = "gtcnd"
    use_separable: bool = True
    depth: int = DEPTH
    seed: int = 0
    floor: float = PARAM_FLOOR
    upper_bound: float | None = None

    def __post_init__(self):
        if self.depth != DEPTH:
            raise DomainError(f"only depth {DEPTH} is supported")
        if self.base_channels < 1 or self.in_channels < 1:
            raise DomainError("channel counts must be >= 1")
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family: {self.family}")

    def blocks(self) -> list[tuple[str, int, int]]:
        """(name, in_channels, out_channels) of the conv blocks in forward order."""
        c = self.base_channels
        return [
            ("enc1", self.in_channels, c),
            ("enc2", c, 2 * c),
            ("bottleneck", 2 * c, 4 * c),
            ("dec2", 4 * c + 2 * c, 2 * c),
            ("dec1", 2 * c + c, c),
        ]


@dataclass
class ModelParams:
    values: np.ndarray
    layout: dict[str, tuple[int, tuple[int, ...]]]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, shapes: dict[str, tuple[int, ...]], buffers: dict[str, np.ndarray] | None = None) -> "ModelParams":
        layout, offset = {}, 0
        for name, shape in shapes.items():
            layout[name] = (offset, tuple(shape))
            offset += int(np.prod(shape))
        return cls(np.zeros(offset), layout, dict(buffers or {}))

    @property
    def n_params(self) -> int:
        return self.values.size

    def view(self, name: str) -> np.ndarray:
        offset, shape = self.layout[name]
        return self.values[offset:offset + int(np.prod(shape))].reshape(shape)

    def names(self) -> list[str]:
        return list(self.layout)

    def flatten(self, grads: dict[str, np.ndarray | None]) -> np.ndarray:
        """Pack per-name arrays into a vector aligned with `values` (missing → 0)."""
        flat = np.zeros_like(self.values)
        for name, (offset, shape) in self.layout.items():
            g = grads.get(name)
            if g is not None:
                flat[offset:offset + g.size] = np.asarray(g).ravel()
        return flat

    def copy(self) -> "ModelParams":
        return ModelParams(self.values.copy(), dict(self.layout), {k: v.copy() for k, v in self.buffers.items()})


@dataclass
class UNetModel:
    config: UNetConfig
    params: ModelParams


@dataclass
class ForwardPass:
    output: Tensor
    leaves: dict[str, Tensor]
    buffers: dict[str, np.ndarray]


def _shapes(cfg: UNetConfig) -> tuple[dict[str, tuple[int, ...]], dict[str, np.ndarray]]:
    shapes: dict[str, tuple[int, ...]] = {}
    buffers: dict[str, np.ndarray] = {
        "input.mean": np.zeros(cfg.in_channels),
        "input.std": np.ones(cfg.in_channels),
    }
    for name, cin, cout in cfg.blocks():
        if cfg.use_separable:
            shapes[f"{name}.depthwise"] = (3, 3, cin)
            shapes[f"{name}.pointwise"] = (cin, cout)
        else:
            shapes[f"{name}.kernel"] = (3, 3, cin, cout)
        shapes[f"{name}.bn_scale"] = (cout,)
        shapes[f"{name}.bn_offset"] = (cout,)
        buffers[f"{name}.bn_mean"] = np.zeros(cout)
        buffers[f"{name}.bn_var"] = np.ones(cout)
    shapes["head.kernel"] = (cfg.base_channels, 3)
    shapes["head.bias"] = (3,)
    return shapes, buffers


def init_model(cfg: UNetConfig, stream: int = 0) -> UNetModel:
    """Fan-in-scaled uniform weights from default_rng([seed, stream])."""
    rng = np.random.default_rng([cfg.seed, stream])
    shapes, buffers = _shapes(cfg)
    params = ModelParams.zeros(shapes, buffers)
    for name, (_, shape) in params.layout.items():
        view = params.view(name)
        if name.endswith(".bn_scale"):
            view[...] = 1.0
        elif name.endswith((".bn_offset", ".bias")):
            view[...] = 0.0
        else:
            fan_in = int(np.prod(shape[:-1])) if name.endswith((".pointwise", ".kernel")) else 9
            gain = 3.0 if name.startswith("head.") else 6.0
            bound = np.sqrt(gain / fan_in)
            view[...] = rng.uniform(-bound, bound, size=shape)
    return UNetModel(cfg, params)


def unet_forward(model: UNetModel, x, mode: str = "infer") -> ForwardPass:
    """
    Args:
        x: (B, H, W, d) or (H, W, d) predictors.
        mode: batch-norm mode ("train", "batch" or "infer"); parameter leaves
            collect gradients unless mode is "infer".

    Returns the (B, H, W, 3) parameter fields (batch axis dropped for 3-D input),
    the leaf tensors by parameter name and the resulting batch-norm buffers.
    """
    cfg, store = model.config, model.params
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or x.shape[-1] != cfg.in_channels:
        raise DomainError(f"expected (B, H, W, {cfg.in_channels}) predictors, got shape {x.shape}")
    _, H, W, _ = x.shape

    track = mode != "infer"
    leaves = {name: Tensor(store.view(name), requires_grad=track, name=name) for name in store.names()}
    buffers = dict(store.buffers)

    xn = (x - buffers["input.mean"]) / buffers["input.std"]
    h = ad.pad_spatial(Tensor(xn), (-H) % MULTIPLE, (-W) % MULTIPLE)

    def block(name: str, inp: Tensor) -> Tensor:
        if cfg.use_separable:
            conv = separable_conv2d(inp, leaves[f"{name}.depthwise"], leaves[f"{name}.pointwise"])
        else:
            conv = conv2d(inp, leaves[f"{name}.kernel"])
        out, (mean, var) = batch_norm(
            conv,
            leaves[f"{name}.bn_scale"],
            leaves[f"{name}.bn_offset"],
            buffers[f"{name}.bn_mean"],
            buffers[f"{name}.bn_var"],
            mode=mode,
        )
        buffers[f"{name}.bn_mean"], buffers[f"{name}.bn_var"] = mean, var
        return relu(out)

    e1 = block("enc1", h)
    e2 = block("enc2", max_pool2d(e1))
    b = block("bottleneck", max_pool2d(e2))
    d2 = block("dec2", concat_channels(bilinear_upsample(b), e2))
    d1 = block("dec1", concat_channels(bilinear_upsample(d2), e1))
    raw = pointwise_conv(d1, leaves["head.kernel"], leaves["head.bias"])
    raw = raw[:, :H, :W, :]
    out = link_params(raw, cfg.family, floor=cfg.floor, upper_bound=cfg.upper_bound)
    if single:
        out = out[0]
    return ForwardPass(out, leaves, buffers)


def predict_params(model: UNetModel, x) -> np.ndarray:
    """Parameter fields in inference mode."""
    return unet_forward(model, x, mode="infer").output.data
