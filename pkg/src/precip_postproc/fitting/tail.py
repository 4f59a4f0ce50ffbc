"""
Tail extension of quantile forecasts.

When a quantile forecast gives a large enough probability of exceeding an
activation threshold, a parametric distribution is fitted to its moments and
the upper quantiles are raised to the fitted ones where those are higher.

Grids are processed in row chunks on a process pool; each chunk result is
stored by chunk index, so the output does not depend on worker count.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from ..distributions import FAMILIES, CsgdParams, GtcndParams, family_quantile
from ..errors import DomainError
from .moments import empirical_moments, fit_moments
from .quantiles import QuantileForecast

logger = logging.getLogger(__name__)

DEFAULT_N_UPDATE = 10


@dataclass(frozen=True)
class TailConfig:
    family: str = "gtcnd"
    activation_threshold: float = 5.0
    activation_prob: float = 0.05
    levels_to_update: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family: {self.family}")
        if not self.activation_threshold >= 0.0:
            raise DomainError("activation_threshold must be >= 0")
        if not 0.0 < self.activation_prob < 1.0:
            raise DomainError("activation_prob must lie in (0, 1)")
        if self.levels_to_update is not None:
            object.__setattr__(self, "levels_to_update", tuple(int(i) for i in self.levels_to_update))

    def update_indices(self, n_levels: int) -> np.ndarray:
        """Level indices to update; defaults to the top ten."""
        if self.levels_to_update is None:
            return np.arange(max(0, n_levels - DEFAULT_N_UPDATE), n_levels)
        idx = np.unique(np.asarray(self.levels_to_update, dtype=np.intp))
        if idx.size and (idx[0] < 0 or idx[-1] >= n_levels):
            raise DomainError(f"levels_to_update out of range for {n_levels} levels")
        return idx


@dataclass
class TailResult:
    forecast: QuantileForecast
    params: GtcndParams | CsgdParams | None
    activated: bool
    success: bool
    message: str


def tail_extend(q: QuantileForecast, cfg: TailConfig, params: GtcndParams | CsgdParams | None = None) -> TailResult:
    """
    Extend the upper tail of one quantile forecast.

    With `params` given the fit is skipped and those parameters are used, which
    makes re-application to the output a no-op. Updated values are
    max(original, fitted); a running maximum over levels then restores
    monotonicity when the update set is not a suffix of the level grid.
    """
    if q.shape:
        raise DomainError("tail_extend works on a single forecast; use tail_extend_grid")

    p_exceed = float(q.exceedance(cfg.activation_threshold))
    if p_exceed < cfg.activation_prob:
        return TailResult(q, None, False, True, f"not activated (P(X>{cfg.activation_threshold:g}) = {p_exceed:.4f})")

    if params is None:
        dry, m1, m2, m3 = empirical_moments(q)
        fit = fit_moments(cfg.family, dry, m1, m2, m3)
        if not fit.success:
            logger.warning("tail fit failed, keeping quantiles: %s", fit.message)
            return TailResult(q, None, True, False, fit.message)
        params = fit.params

    idx = cfg.update_indices(q.n_levels)
    values = q.values.copy()
    fitted = np.asarray(family_quantile(params, q.levels[idx]), dtype=np.float64)
    values[idx] = np.maximum(values[idx], fitted)
    values = np.maximum.accumulate(values)
    n_raised = int(np.count_nonzero(values != q.values))
    return TailResult(q.replace_values(values), params, True, True, f"OK ({n_raised} levels raised)")


@dataclass
class TailGridResult:
    forecast: QuantileForecast
    params: np.ndarray
    activated: np.ndarray
    failed: np.ndarray


def _extend_block(values: np.ndarray, levels: np.ndarray, cfg: TailConfig):
    n_points = values.shape[0]
    out = values.copy()
    params = np.full((n_points, 3), np.nan)
    activated = np.zeros(n_points, dtype=bool)
    failed = np.zeros(n_points, dtype=bool)
    for i in range(n_points):
        result = tail_extend(QuantileForecast(levels, values[i]), cfg)
        out[i] = result.forecast.values
        activated[i] = result.activated
        failed[i] = not result.success
        if result.params is not None:
            params[i] = result.params.stack()
    return out, params, activated, failed


def worker_tail(args):
    """Worker function for one block of grid points."""
    block_index, values, levels, cfg = args
    start = time.time()
    return block_index, _extend_block(values, levels, cfg), time.time() - start


def tail_extend_grid(q: QuantileForecast, cfg: TailConfig, workers: int = 1, verbose: bool = False) -> TailGridResult:
    """Apply tail_extend to every grid point; per-point failures only set a flag."""
    grid_shape = q.shape
    flat = q.values.reshape(-1, q.n_levels)
    n_points = flat.shape[0]
    blocks = np.array_split(np.arange(n_points), max(1, min(n_points, 4 * workers)))
    jobs = [(b, flat[idx], q.levels, cfg) for b, idx in enumerate(blocks) if idx.size]

    results: dict[int, tuple] = {}
    if workers <= 1:
        for job in tqdm(jobs, desc="tail", disable=not verbose):
            block_index, result, _ = worker_tail(job)
            results[block_index] = result
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(worker_tail, job) for job in jobs]
            for future in tqdm(as_completed(futures), total=len(futures), desc="tail", disable=not verbose):
                block_index, result, duration = future.result()
                results[block_index] = result
                logger.debug("tail block %d done (%.1fs)", block_index, duration)

    ordered = [results[b] for b in sorted(results)]
    values = np.concatenate([r[0] for r in ordered]).reshape(grid_shape + (q.n_levels,))
    params = np.concatenate([r[1] for r in ordered]).reshape(grid_shape + (3,))
    activated = np.concatenate([r[2] for r in ordered]).reshape(grid_shape)
    failed = np.concatenate([r[3] for r in ordered]).reshape(grid_shape)
    logger.info(
        "tail extension: %d/%d points activated, %d fit failures",
        int(activated.sum()), n_points, int(failed.sum()),
    )
    return TailGridResult(q.replace_values(values), params, activated, failed)
