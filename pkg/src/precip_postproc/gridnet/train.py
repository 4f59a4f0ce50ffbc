"""
Training of the distributional U-Net by CRPS minimization.

Adam over shuffled mini-batches. Initial weights come from
default_rng([unet seed, model_index]) and the batch order from
default_rng([train seed, 1, model_index]). The validation loss uses batch
statistics without touching the running statistics, so it depends on the
trainable parameters only. The returned model carries the parameters with
the best validation loss.

Several models are trained on a process pool and stored by model index.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from ..distributions import params_from_stack
from ..errors import DomainError
from ..fitting.quantiles import QuantileForecast, check_levels, default_levels
from .loss import backward, crps_loss
from .unet import UNetConfig, UNetModel, init_model, predict_params, unet_forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 50
    seed: int = 0
    clip_norm: float | None = None
    n_models: int = 10
    validation_fraction: float = 0.2

    def __post_init__(self):
        if not self.learning_rate >= 0.0:
            raise DomainError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 1 or self.n_models < 1:
            raise DomainError("batch_size, epochs and n_models must be >= 1")
        if self.clip_norm is not None and not self.clip_norm > 0.0:
            raise DomainError("clip_norm must be > 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise DomainError("validation_fraction must lie in [0, 1)")


@dataclass
class TrainingData:
    inputs: np.ndarray
    obs: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.obs = np.asarray(self.obs, dtype=np.float64)
        if self.inputs.ndim != 4 or self.obs.shape != self.inputs.shape[:3]:
            raise DomainError(f"inputs (N, H, W, d) and obs (N, H, W) do not match: {self.inputs.shape} vs {self.obs.shape}")
        if self.inputs.shape[0] == 0:
            raise DomainError("training data is empty")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.obs.shape[1:]:
                raise DomainError(f"mask {self.mask.shape} does not match grid {self.obs.shape[1:]}")

    def __len__(self):
        return self.inputs.shape[0]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    duration: float


@dataclass
class TrainResult:
    model: UNetModel
    history: list[EpochRecord] = field(default_factory=list)
    success: bool = True
    message: str = "OK"
    best_epoch: int = 0
    model_index: int = 0
    duration: float = 0.0


class Adam:
    def __init__(self, n: int, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, values: np.ndarray, grad: np.ndarray) -> None:
        """Update `values` in place."""
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def loss_and_grad(model: UNetModel, x, obs, mask=None, mode: str = "train"):
    """One forward/backward pass: (loss, flat gradient, updated buffers)."""
    fwd = unet_forward(model, x, mode=mode)
    loss = crps_loss(fwd.output, obs, model.config.family, mask)
    grad = backward(model.params, fwd, loss)
    return float(loss.data), grad, fwd.buffers


def evaluate(model: UNetModel, x, obs, mask=None, mode: str = "batch") -> float:
    fwd = unet_forward(model, x, mode=mode if mode != "train" else "batch")
    return float(crps_loss(fwd.output.data, obs, model.config.family, mask).data)


def split_days(n: int, validation_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint train/validation day indices from default_rng([seed, 0])."""
    order = np.random.default_rng([seed, 0]).permutation(n)
    n_val = int(round(validation_fraction * n))
    if n_val >= n:
        n_val = n - 1
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def _standardize(model: UNetModel, inputs: np.ndarray) -> None:
    mean = inputs.mean(axis=(0, 1, 2))
    std = inputs.std(axis=(0, 1, 2))
    model.params.buffers["input.mean"] = mean
    model.params.buffers["input.std"] = np.where(std > 0.0, std, 1.0)


def train(data: TrainingData, unet_cfg: UNetConfig, train_cfg: TrainConfig, model_index: int = 0, verbose: bool = False) -> TrainResult:
    """
    Train one model; divergence (a non-finite loss or gradient) stops training
    and returns the last parameters that produced a finite loss.
    """
    start = time.time()
    if data.inputs.shape[-1] != unet_cfg.in_channels:
        raise DomainError(f"data has {data.inputs.shape[-1]} predictors, model expects {unet_cfg.in_channels}")

    train_idx, val_idx = split_days(len(data), train_cfg.validation_fraction, train_cfg.seed)
    model = init_model(unet_cfg, stream=model_index)
    _standardize(model, data.inputs[train_idx])
    store = model.params
    opt = Adam(store.n_params, train_cfg.learning_rate)
    rng = np.random.default_rng([train_cfg.seed, 1, model_index])

    select_idx = val_idx if val_idx.size else train_idx
    best = store.copy()
    last_finite = best
    best_loss, best_epoch = np.inf, 0
    history: list[EpochRecord] = []

    def result(success: bool, message: str, params) -> TrainResult:
        return TrainResult(UNetModel(unet_cfg, params), history, success, message, best_epoch, model_index, time.time() - start)

    for epoch in tqdm(range(1, train_cfg.epochs + 1), desc=f"model {model_index}", disable=not verbose):
        t0 = time.time()
        order = rng.permutation(train_idx)
        total, count = 0.0, 0
        for s in range(0, order.size, train_cfg.batch_size):
            batch = order[s:s + train_cfg.batch_size]
            try:
                loss, grad, buffers = loss_and_grad(model, data.inputs[batch], data.obs[batch], data.mask, "train")
            except DomainError as exc:
                logger.debug("model %d: %s", model_index, exc)
                loss, grad, buffers = np.nan, None, None
            if grad is None or not (np.isfinite(loss) and np.all(np.isfinite(grad))):
                message = f"diverged at epoch {epoch}, step {s // train_cfg.batch_size + 1}"
                logger.warning("model %d %s; returning last finite parameters", model_index, message)
                return result(False, message, last_finite)
            last_finite = store.copy()
            if train_cfg.clip_norm is not None:
                norm = float(np.linalg.norm(grad))
                if norm > train_cfg.clip_norm:
                    grad = grad * (train_cfg.clip_norm / norm)
            opt.step(store.values, grad)
            store.buffers = buffers
            total += loss * batch.size
            count += batch.size

        try:
            val_loss = evaluate(model, data.inputs[select_idx], data.obs[select_idx], data.mask)
        except DomainError:
            val_loss = np.nan
        history.append(EpochRecord(epoch, total / count, val_loss, time.time() - t0))
        logger.debug("model %d epoch %d: train %.6f val %.6f", model_index, epoch, total / count, val_loss)
        if not np.isfinite(val_loss):
            message = f"diverged at epoch {epoch} (validation loss not finite)"
            logger.warning("model %d %s", model_index, message)
            return result(False, message, best)
        if val_loss < best_loss:
            best_loss, best_epoch = val_loss, epoch
            best = store.copy()

    logger.info("model %d trained: best validation CRPS %.6f at epoch %d", model_index, best_loss, best_epoch)
    return result(True, "OK", best)


def worker_train(args):
    """Worker function for training one ensemble member."""
    model_index, data, unet_cfg, train_cfg = args
    return model_index, train(data, unet_cfg, train_cfg, model_index)


def train_ensemble(data: TrainingData, unet_cfg: UNetConfig, train_cfg: TrainConfig, workers: int = 1, progress=None) -> list[TrainResult]:
    """
    Train train_cfg.n_models models; results are ordered by model index.

    `progress`, if given, is called as progress(done, total, result) after each
    model finishes.
    """
    jobs = [(i, data, unet_cfg, train_cfg) for i in range(train_cfg.n_models)]
    results: dict[int, TrainResult] = {}
    if workers <= 1:
        for job in jobs:
            index, res = worker_train(job)
            results[index] = res
            if progress:
                progress(len(results), len(jobs), res)
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(worker_train, job) for job in jobs]
            for future in as_completed(futures):
                index, res = future.result()
                results[index] = res
                if progress:
                    progress(len(results), len(jobs), res)
    return [results[i] for i in range(len(jobs))]


def ensemble_aggregate(models: list[UNetModel], x, levels=None) -> QuantileForecast:
    """Level-wise mean of every model's quantiles (Vincentization)."""
    if not models:
        raise DomainError("at least one model is required")
    levels = default_levels() if levels is None else check_levels(levels)
    total = None
    for model in models:
        fields = predict_params(model, x)
        q = QuantileForecast.from_distribution(params_from_stack(model.config.family, fields), levels)
        total = q.values if total is None else total + q.values
    return QuantileForecast(levels, total / len(models))
