"""
Synthetic gridded precipitation datasets with known truth.

Each day draws latent Gaussian random fields (white noise smoothed with a
Gaussian kernel of width length_scale), maps them through fixed smooth
functions to truth parameter fields, then samples one observation and a raw
ensemble per grid point. The raw ensemble comes from a distorted truth
(location shifted by `bias`, scale multiplied by `dispersion_factor`), so it
is miscalibrated by construction. Predictors are the ensemble summaries
(mean, min, max, sd) of every ensemble variable followed by the constant
fields, giving d = 4 · n_vars + 7 channels.

Random streams: constants use default_rng([seed, 0]), day i uses
default_rng([seed, 1, i]), so a dataset does not depend on the worker count.

With zero latent fields the truth is the baseline:
    GTCND  L = 0.5, mu = 1, sigma = 1
    CSGD   k = 1, theta = 2, delta = -1
"""

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt, gaussian_filter
from scipy.special import expit, logit
from tqdm import tqdm

from ..dataio.gridfile import GridTensor, write_grid
from ..dataio.manifest import Manifest, write_manifest
from ..distributions import FAMILIES, PARAM_NAMES, CsgdParams, GtcndParams, family_sample, params_from_stack
from ..errors import DomainError
from ..verification.skill import censor_mask

logger = logging.getLogger(__name__)

CONSTANT_NAMES = ("altitude", "land_sea_mask", "distance_to_coast", "row", "col", "slope_row", "slope_col")
SUMMARY_NAMES = ("mean", "min", "max", "sd")
STREAM_CONSTANTS = 0
STREAM_DAYS = 1
SEA_FRACTION = 0.3
BORDER = 2

BASELINE = {
    "gtcnd": (0.5, 1.0, 1.0),
    "csgd": (1.0, 2.0, -1.0),
}

FILES = {
    "predictors": "predictors.gpt",
    "observations": "observations.gpt",
    "truth": "truth.gpt",
    "raw_ensemble": "raw_ensemble.gpt",
    "constants": "constants.gpt",
    "mask": "mask.gpt",
}


def predictor_count(n_vars: int, n_constants: int = len(CONSTANT_NAMES)) -> int:
    return len(SUMMARY_NAMES) * n_vars + n_constants


@dataclass(frozen=True)
class SyntheticConfig:
    H: int = 32
    W: int = 32
    n_days: int = 64
    family: str = "gtcnd"
    ensemble_size: int = 17
    bias: float = 0.0
    dispersion_factor: float = 1.0
    length_scale: float = 4.0
    seed: int = 0
    n_vars: int = 1
    test_fraction: float = 0.25

    def __post_init__(self):
        if self.H < 8 or self.W < 8:
            raise DomainError(f"grid must be at least 8×8, got {self.H}×{self.W}")
        if self.ensemble_size < 2:
            raise DomainError("ensemble_size must be >= 2")
        if not 0.0 < self.dispersion_factor <= 1.0:
            raise DomainError("dispersion_factor must lie in (0, 1]")
        if not self.length_scale > 0.0:
            raise DomainError("length_scale must be > 0")
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family: {self.family}")
        if self.n_days < 2 or self.n_vars < 1:
            raise DomainError("need n_days >= 2 and n_vars >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise DomainError("test_fraction must lie in (0, 1)")

    @property
    def d(self) -> int:
        return predictor_count(self.n_vars)


def smooth_field(rng: np.random.Generator, shape: tuple[int, int], length_scale: float) -> np.ndarray:
    """Gaussian-smoothed white noise rescaled to zero mean and unit variance."""
    field = gaussian_filter(rng.standard_normal(shape), sigma=length_scale, mode="reflect")
    field -= field.mean()
    std = field.std()
    return field / std if std > 0.0 else field


def gen_constant_fields(cfg: SyntheticConfig) -> GridTensor:
    """Pseudo-altitude, land-sea mask, distance to the coast, coordinates and slopes."""
    rng = np.random.default_rng([cfg.seed, STREAM_CONSTANTS])
    H, W = cfg.H, cfg.W
    altitude = smooth_field(rng, (H, W), cfg.length_scale)
    land = altitude > np.quantile(altitude, SEA_FRACTION)

    # coast cells: any 4-neighbour on the other side of the mask
    padded = np.pad(land, 1, mode="edge")
    coast = np.zeros_like(land)
    for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        coast |= padded[1 + di:1 + di + H, 1 + dj:1 + dj + W] != land
    distance = distance_transform_edt(~coast) if coast.any() else np.full((H, W), float(max(H, W)))

    rows, cols = np.meshgrid(np.linspace(0.0, 1.0, H), np.linspace(0.0, 1.0, W), indexing="ij")
    slope_row, slope_col = np.gradient(altitude)
    data = np.stack([altitude, land.astype(np.float64), distance, rows, cols, slope_row, slope_col], axis=-1)
    return GridTensor(data, list(CONSTANT_NAMES), {"seed": cfg.seed, "length_scale": cfg.length_scale})


def gen_latent(cfg: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    """(H, W, 3) latent fields for one day."""
    return np.stack([smooth_field(rng, (cfg.H, cfg.W), cfg.length_scale) for _ in range(3)], axis=-1)


def gen_truth_params(cfg: SyntheticConfig, constants: GridTensor, latent) -> np.ndarray:
    """
    Truth parameter fields (H, W, 3) from latent fields and constants.

    Altitude modulates the latent amplitude, so a zero latent field gives the
    baseline everywhere.
    """
    z = np.asarray(latent, dtype=np.float64)
    if z.shape != (cfg.H, cfg.W, 3):
        raise DomainError(f"latent must be ({cfg.H}, {cfg.W}, 3), got {z.shape}")
    s = 1.0 + 0.25 * np.tanh(constants.channel("altitude"))
    z0, z1, z2 = (s * z[..., i] for i in range(3))
    a, b, c = BASELINE[cfg.family]
    if cfg.family == "gtcnd":
        fields = np.stack([
            expit(logit(a) + 1.2 * z0),
            b + 0.8 * z1 + 0.1 * z1 * np.abs(z1),
            c * np.exp(0.3 * z2),
        ], axis=-1)
    else:
        fields = np.stack([
            a * np.exp(0.3 * z0),
            b * np.exp(0.3 * z1 + 0.05 * z1**2),
            c * np.exp(0.4 * z2),
        ], axis=-1)
    params_from_stack(cfg.family, fields)
    return fields


def sample_obs(truth: GtcndParams | CsgdParams, rng: np.random.Generator) -> np.ndarray:
    """One independent draw per grid point, shape (H, W, 1)."""
    return np.asarray(family_sample(truth, rng))[..., None]


def sample_raw_ensemble(truth: GtcndParams | CsgdParams, cfg: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    """
    (H, W, m) members from the distorted truth: GTCND mu + bias and
    sigma · dispersion_factor; CSGD delta + bias and theta · dispersion_factor.
    """
    m = cfg.ensemble_size
    size = truth.shape + (m,)
    if isinstance(truth, GtcndParams):
        distorted = GtcndParams(truth.L[..., None], truth.mu[..., None] + cfg.bias, truth.sigma[..., None] * cfg.dispersion_factor)
        return np.asarray(family_sample(distorted, rng, size))
    # a shifted delta may turn positive, so draw directly rather than through CsgdParams
    z = rng.standard_gamma(np.broadcast_to(truth.k[..., None], size), size=size)
    return np.maximum(truth.delta[..., None] + cfg.bias + truth.theta[..., None] * cfg.dispersion_factor * z, 0.0)


def ensemble_summaries(members) -> np.ndarray:
    """(H, W, 4) mean, min, max and sample standard deviation over the member axis."""
    members = np.asarray(members, dtype=np.float64)
    return np.stack([
        members.mean(axis=-1),
        members.min(axis=-1),
        members.max(axis=-1),
        members.std(axis=-1, ddof=1),
    ], axis=-1)


def predictor_names(n_vars: int) -> list[str]:
    names = [f"var{v}_{s}" for v in range(n_vars) for s in SUMMARY_NAMES]
    return names + list(CONSTANT_NAMES)


def generate_day(cfg: SyntheticConfig, constants: GridTensor, day: int) -> dict[str, np.ndarray]:
    """All arrays of one day from its own random stream."""
    rng = np.random.default_rng([cfg.seed, STREAM_DAYS, day])
    truth_fields = gen_truth_params(cfg, constants, gen_latent(cfg, rng))
    truth = params_from_stack(cfg.family, truth_fields)
    obs = sample_obs(truth, rng)
    ensembles = [sample_raw_ensemble(truth, cfg, rng) for _ in range(cfg.n_vars)]
    predictors = np.concatenate([ensemble_summaries(e) for e in ensembles] + [constants.data], axis=-1)
    return {"predictors": predictors, "observations": obs, "truth": truth_fields, "raw_ensemble": ensembles[0]}


def worker_day(args):
    """Worker function for generating one day."""
    cfg, constants, day = args
    return day, generate_day(cfg, constants, day)


def split_by_day(n_days: int, test_fraction: float) -> dict[str, list[int]]:
    """Leading days train, trailing days test."""
    n_test = min(n_days - 1, max(1, int(round(test_fraction * n_days))))
    return {"train": list(range(n_days - n_test)), "test": list(range(n_days - n_test, n_days))}


def build_dataset(cfg: SyntheticConfig, out_dir: Path | str, workers: int = 1, verbose: bool = False) -> Manifest:
    """Generate every day and write the grid files plus manifest.yaml into out_dir."""
    out_dir = Path(out_dir)
    start = time.time()
    constants = gen_constant_fields(cfg)
    jobs = [(cfg, constants, day) for day in range(cfg.n_days)]
    days: dict[int, dict[str, np.ndarray]] = {}

    with tqdm(total=len(jobs), desc="days", disable=not verbose) as bar:
        if workers <= 1:
            for job in jobs:
                day, arrays = worker_day(job)
                days[day] = arrays
                bar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(worker_day, job) for job in jobs]
                for future in as_completed(futures):
                    day, arrays = future.result()
                    days[day] = arrays
                    bar.update(1)

    def stacked(key: str) -> np.ndarray:
        return np.stack([days[i][key] for i in range(cfg.n_days)])

    attrs = {"family": cfg.family, "seed": cfg.seed}
    land = constants.channel("land_sea_mask")
    tensors = {
        "predictors": GridTensor(stacked("predictors"), predictor_names(cfg.n_vars), attrs),
        "observations": GridTensor(stacked("observations"), ["precip"], attrs),
        "truth": GridTensor(stacked("truth"), list(PARAM_NAMES[cfg.family]), {**attrs, "kind": "params"}),
        "raw_ensemble": GridTensor(
            stacked("raw_ensemble"), [f"member{i}" for i in range(cfg.ensemble_size)], {**attrs, "kind": "ensemble"}
        ),
        "constants": constants,
        "mask": GridTensor(censor_mask(land, BORDER).astype(np.float64)[..., None], ["censor"], {"border": BORDER}),
    }
    for role, tensor in tensors.items():
        write_grid(out_dir / FILES[role], tensor)

    manifest = Manifest(
        name=out_dir.name,
        files=dict(FILES),
        split=split_by_day(cfg.n_days, cfg.test_fraction),
        config=dataclasses.asdict(cfg),
    )
    write_manifest(out_dir, manifest)
    logger.info("dataset %s: %d days of %d×%d, d=%d (%.1fs)", out_dir, cfg.n_days, cfg.H, cfg.W, cfg.d, time.time() - start)
    return manifest
