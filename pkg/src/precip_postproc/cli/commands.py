"""
Pipeline commands.

Each cmd_* takes the parsed argparse namespace, does its work through the
library and dataio formats, prints a short summary and returns an exit code.
Validation problems raise (main maps them to exit 1); nothing here mutates
its inputs.
"""

import dataclasses
import logging
import time
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
import psutil

from ..datagen.synthetic import build_dataset
from ..dataio.checkpoint import load_checkpoint, save_checkpoint
from ..dataio.gridfile import GridTensor, read_grid, write_grid
from ..dataio.manifest import load_dataset
from ..dataio.reports import Report, crpss_report, rank_histogram_report, read_report, roc_report, write_report
from ..distributions import PARAM_NAMES, params_from_stack
from ..errors import DomainError
from ..fitting.climatology import fit_climatology
from ..fitting.quantiles import QuantileForecast, default_levels
from ..fitting.tail import tail_extend_grid
from ..gridnet.train import TrainingData, TrainResult, ensemble_aggregate, train_ensemble
from ..gridnet.unet import predict_params
from ..scoring.crps import crps_ensemble_fair, crps_from_quantiles, crps_parametric
from ..verification.ranks import MIN_EXPECTED, jpz_rejection_map, jpz_test, observation_ranks, rank_histogram
from ..verification.roc import exceedance_prob, roc_curve
from ..verification.skill import censor_mask, crpss_map
from .config import ExperimentConfig, load_config, resolve_seed, resolve_workers

logger = logging.getLogger(__name__)

CHECKPOINT_PATTERN = "model_*.gck"
RANK_STREAM = 2


def get_available_ram_gb() -> float:
    """Get available RAM in GB."""
    return psutil.virtual_memory().available / (1024**3)


def banner(title: str) -> None:
    print(f"\n{title} at {datetime.now().strftime('%H:%M:%S')}")
    print("=" * 70)


def closing(start: float, successful: int, failed: int) -> None:
    elapsed = time.time() - start
    print()
    print("=" * 70)
    print(f"Completed at {datetime.now().strftime('%H:%M:%S')} ({elapsed / 60:.1f} min total)")
    print(f"Successful: {successful} | Failed: {failed}")


def _experiment(args) -> ExperimentConfig:
    cfg = load_config(getattr(args, "config", None))
    return cfg.with_seed(resolve_seed(getattr(args, "seed", None), cfg))


def _workers(args) -> int:
    workers = resolve_workers(getattr(args, "workers", None))
    logger.info("workers: %d | available RAM: %.1f GB", workers, get_available_ram_gb())
    return workers


def _quantile_names(n: int) -> list[str]:
    return [f"q{i:03d}" for i in range(1, n + 1)]


def _quantile_grid(q: QuantileForecast, days: list[int], attrs: dict) -> GridTensor:
    return GridTensor(q.values, _quantile_names(q.n_levels), {
        **attrs,
        "kind": "quantiles",
        "levels": [float(a) for a in q.levels],
        "days": [int(d) for d in days],
    })


# ---------------------------------------------------------------------------
# Forecast files
# ---------------------------------------------------------------------------


@dataclass
class Forecast:
    """A forecast grid file: quantiles, parameter fields or ensemble members over (day, H, W)."""

    kind: str
    value: object
    days: list[int]

    def scores(self, y) -> np.ndarray:
        if self.kind == "quantiles":
            return np.asarray(crps_from_quantiles(self.value, y))
        if self.kind == "params":
            return np.asarray(crps_parametric(self.value, y))
        return np.asarray(crps_ensemble_fair(self.value, y))

    def rank_values(self, n_levels: int) -> np.ndarray:
        if self.kind == "quantiles":
            return self.value.values
        if self.kind == "params":
            return QuantileForecast.from_distribution(self.value, default_levels(n_levels)).values
        return self.value

    def exceedance(self, t: float) -> np.ndarray:
        return np.asarray(exceedance_prob(self.value, t))


def load_forecast(path: Path | str, days: list[int] | None = None) -> Forecast:
    """Read a forecast file, optionally restricted to the given days (in that order)."""
    tensor = read_grid(path, as_float64=True)
    attrs = tensor.attrs
    kind = attrs.get("kind", "ensemble")
    if kind not in ("quantiles", "params", "ensemble"):
        raise DomainError(f"{path}: unknown forecast kind {kind!r}")
    if tensor.data.ndim != 4:
        raise DomainError(f"{path}: forecast grids must be (day, H, W, channel), got {tensor.dims}")
    file_days = [int(d) for d in attrs.get("days", range(tensor.dims[0]))]
    if len(file_days) != tensor.dims[0]:
        raise DomainError(f"{path}: {len(file_days)} day labels for {tensor.dims[0]} days")
    if days is None:
        days = file_days
    missing = sorted(set(days) - set(file_days))
    if missing:
        raise DomainError(f"{path}: no forecast for days {missing[:5]}")
    pos = {d: i for i, d in enumerate(file_days)}
    data = tensor.data[[pos[d] for d in days]]

    if kind == "quantiles":
        value = QuantileForecast(attrs["levels"], data)
    elif kind == "params":
        value = params_from_stack(attrs.get("family", ""), data)
    else:
        value = data
    return Forecast(kind, value, list(days))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_datagen(args) -> int:
    exp = _experiment(args)
    workers = _workers(args)
    cfg = exp.dataset
    print(f"Dataset: {cfg.n_days} days of {cfg.H}×{cfg.W} ({cfg.family}), d={cfg.d}, m={cfg.ensemble_size}")
    print(f"Seed: {cfg.seed} | Workers: {workers}")
    banner("Starting")
    start = time.time()
    manifest = build_dataset(cfg, args.out, workers=workers, verbose=args.verbose)
    for i, (role, name) in enumerate(manifest.files.items(), 1):
        print(f"[{i}/{len(manifest.files)}] ✓ {role}: {name}")
    closing(start, len(manifest.files), 0)
    print(f"Split: {len(manifest.split['train'])} train / {len(manifest.split['test'])} test days")
    return 0


def _training_data(directory: Path) -> tuple[TrainingData, dict, list[int]]:
    manifest, tensors = load_dataset(directory)
    train_days = manifest.split["train"]
    inputs = tensors["predictors"].data[train_days].astype(np.float64)
    obs = tensors["observations"].data[train_days, ..., 0].astype(np.float64)
    return TrainingData(inputs, obs), manifest.config, train_days


def cmd_train(args) -> int:
    exp = _experiment(args)
    workers = _workers(args)
    data, data_config, train_days = _training_data(Path(args.dataset))
    family = exp.family if args.config else data_config.get("family", exp.family)
    unet_cfg = dataclasses.replace(exp.unet, in_channels=data.inputs.shape[-1], family=family)
    train_cfg = exp.training if args.models is None else dataclasses.replace(exp.training, n_models=args.models)

    print(f"Training {train_cfg.n_models} models ({family}) on {len(train_days)} days, d={unet_cfg.in_channels}")
    print(f"Workers: {workers} | Available RAM: {get_available_ram_gb():.1f} GB")
    banner("Starting")
    start = time.time()

    def progress(done: int, total: int, res: TrainResult) -> None:
        status = "✓" if res.success else "✗"
        best = res.history[res.best_epoch - 1].val_loss if res.best_epoch else float("nan")
        print(f"[{done}/{total}] {status} model {res.model_index} ({res.duration:.1f}s) | best epoch {res.best_epoch} | val CRPS {best:.4f}")
        if not res.success:
            print(f"         Error: {res.message}")

    results = train_ensemble(data, unet_cfg, train_cfg, workers=workers, progress=progress)

    out = Path(args.out)
    history = Report(["model", "epoch", "train_loss", "val_loss"])
    for res in results:
        save_checkpoint(out / f"model_{res.model_index:02d}.gck", res.model, {
            "success": res.success,
            "message": res.message,
            "best_epoch": res.best_epoch,
        })
        for rec in res.history:
            history.add(model=res.model_index, epoch=rec.epoch, train_loss=rec.train_loss, val_loss=rec.val_loss)
    write_report(out / "training_history.csv", history)

    failed = sum(not r.success for r in results)
    closing(start, len(results) - failed, failed)
    if failed == len(results):
        raise RuntimeError("every model diverged")
    return 0


def cmd_predict(args) -> int:
    exp = _experiment(args)
    paths = sorted(Path(args.checkpoints).glob(CHECKPOINT_PATTERN))
    if not paths:
        raise FileNotFoundError(f"no checkpoints matching {CHECKPOINT_PATTERN} in {args.checkpoints}")
    models = [load_checkpoint(p) for p in paths]
    family = models[0].config.family

    manifest, tensors = load_dataset(args.dataset)
    if args.split not in manifest.split:
        raise DomainError(f"dataset has no {args.split!r} split")
    days = manifest.split[args.split]
    x = tensors["predictors"].data[days].astype(np.float64)
    levels = default_levels(args.levels or exp.verification.n_levels)
    out = Path(args.out)

    print(f"Predicting {len(days)} {args.split} days with {len(models)} models ({family})")
    banner("Starting")
    start = time.time()
    for i, (path, model) in enumerate(zip(paths, models), 1):
        t0 = time.time()
        fields = predict_params(model, x)
        write_grid(out / f"params_{path.stem}.gpt", GridTensor(fields, list(PARAM_NAMES[family]), {
            "kind": "params",
            "family": family,
            "days": [int(d) for d in days],
        }))
        print(f"[{i}/{len(models)}] ✓ {path.name} ({time.time() - t0:.1f}s)")

    q = ensemble_aggregate(models, x, levels)
    write_grid(out / "quantiles.gpt", _quantile_grid(q, days, {"family": family, "n_models": len(models)}))

    train_days = manifest.split.get("train", [])
    if len(train_days) >= 2:
        obs = tensors["observations"].data[train_days, ..., 0].astype(np.float64)
        clim = fit_climatology(obs, family, levels)
        values = np.broadcast_to(clim.forecast.values, (len(days),) + clim.forecast.values.shape)
        write_grid(out / "climatology.gpt", _quantile_grid(QuantileForecast(levels, values), days, {"family": family}))
        print(f"Climatology: {int(clim.fitted.sum())}/{clim.fitted.size} points fitted")
    closing(start, len(models), 0)
    return 0


def cmd_fit_tail(args) -> int:
    exp = _experiment(args)
    workers = _workers(args)
    tensor = read_grid(args.forecasts, as_float64=True)
    if tensor.attrs.get("kind") != "quantiles":
        raise DomainError(f"{args.forecasts}: tail extension needs a quantile forecast")
    tail_cfg = exp.tail
    if args.family:
        tail_cfg = dataclasses.replace(tail_cfg, family=args.family)

    q = QuantileForecast(tensor.attrs["levels"], tensor.data)
    print(f"Tail extension ({tail_cfg.family}) of {int(np.prod(q.shape))} forecasts, "
          f"P(X > {tail_cfg.activation_threshold:g}) >= {tail_cfg.activation_prob:g}")
    banner("Starting")
    start = time.time()
    result = tail_extend_grid(q, tail_cfg, workers=workers, verbose=args.verbose)
    attrs = {**tensor.attrs, "tail_family": tail_cfg.family, "tail_threshold": tail_cfg.activation_threshold}
    write_grid(args.out, GridTensor(result.forecast.values, tensor.channels, attrs))

    n_active, n_failed = int(result.activated.sum()), int(result.failed.sum())
    print(f"Activated: {n_active} | Fit failures (kept unchanged): {n_failed}")
    closing(start, n_active - n_failed, n_failed)
    return 0


def _load_mask(path: Path | str | None, shape: tuple[int, int], border: int) -> np.ndarray:
    if path is None:
        return censor_mask(np.ones(shape), border)
    mask = read_grid(path).data
    mask = mask[..., 0] if mask.ndim == 3 else mask
    if mask.shape != shape:
        raise DomainError(f"mask {mask.shape} does not match grid {shape}")
    return mask > 0.5


def _jpz_summary(ranks: np.ndarray, mask: np.ndarray, n_ranks: int, n_classes: int, alpha: float, report: Report) -> dict:
    hist = rank_histogram(ranks[:, mask], n_ranks, n_classes)
    out = {"rank_classes": n_classes, "rank_count": hist.n_total}
    try:
        jpz = jpz_test(hist, alpha)
    except DomainError as e:
        logger.warning("flatness test skipped: %s", e)
        report.add(scope="pooled", bias=np.nan, dispersion=np.nan, wave=np.nan, p_bias=np.nan, p_dispersion=np.nan,
                   p_wave=np.nan, residual=np.nan, reject=False)
        return out
    report.add(scope="pooled", bias=jpz.bias, dispersion=jpz.dispersion, wave=jpz.wave,
               p_bias=jpz.adjusted_p_values[0], p_dispersion=jpz.adjusted_p_values[1],
               p_wave=jpz.adjusted_p_values[2], residual=jpz.residual, reject=jpz.reject_flatness)
    out["jpz_reject"] = jpz.reject_flatness
    if ranks.shape[0] >= MIN_EXPECTED * n_classes:
        reject = jpz_rejection_map(ranks, n_ranks, n_classes, alpha)
        out["jpz_point_rejection_rate"] = float(reject[mask].mean())
    return out


def cmd_verify(args) -> int:
    exp = _experiment(args)
    vcfg = exp.verification
    thresholds = vcfg.thresholds if args.thresholds is None else tuple(args.thresholds)
    alpha = vcfg.alpha if args.alpha is None else args.alpha
    if not 0.0 < alpha < 1.0 or any(not t >= 0.0 for t in thresholds):
        raise DomainError("alpha must lie in (0, 1) and thresholds must be >= 0")

    forecast = load_forecast(args.forecasts)
    obs_tensor = read_grid(args.observations, as_float64=True)
    if max(forecast.days) >= obs_tensor.dims[0]:
        raise DomainError(f"{args.observations} holds {obs_tensor.dims[0]} days, forecasts reach day {max(forecast.days)}")
    y = obs_tensor.data[forecast.days, ..., 0]
    H, W = y.shape[1:]
    mask = _load_mask(args.mask, (H, W), vcfg.border)
    if not mask.any():
        raise DomainError("the mask leaves no grid point to score")
    out = Path(args.out)

    print(f"Verifying {forecast.kind} forecasts on {len(forecast.days)} days, {int(mask.sum())} scored points")
    banner("Starting")
    start = time.time()
    summary: dict[str, object] = {"n_days": len(forecast.days), "n_points": int(mask.sum())}

    scores = forecast.scores(y)
    if args.reference:
        reference = load_forecast(args.reference, forecast.days)
        ref_scores = reference.scores(y)
        crpss = crpss_map(scores, ref_scores, mask)
        write_report(out / "crpss.csv", crpss_report(scores.mean(axis=0), ref_scores.mean(axis=0), crpss.skill))
        summary.update(crps=crpss.mean_score, ref_crps=crpss.mean_ref_score, crpss=crpss.masked_skill)
    else:
        mean_map = scores.mean(axis=0)
        nan_map = np.full_like(mean_map, np.nan)
        write_report(out / "crps.csv", crpss_report(mean_map, nan_map, nan_map))
        summary["crps"] = float(mean_map[mask].mean())
    print(f"[1/3] ✓ CRPS {summary['crps']:.5f}")

    values = forecast.rank_values(vcfg.n_levels)
    n_ranks = values.shape[-1] + 1
    n_classes = vcfg.n_classes if n_ranks % vcfg.n_classes == 0 else n_ranks
    ranks = observation_ranks(values, y, np.random.default_rng([exp.seed, RANK_STREAM]))
    hist = rank_histogram(ranks[:, mask], n_ranks, n_classes)
    write_report(out / "rank_histogram.csv", rank_histogram_report(hist.counts, n_ranks))
    jpz_report = Report(["scope", "bias", "dispersion", "wave", "p_bias", "p_dispersion", "p_wave", "residual", "reject"])
    summary.update(_jpz_summary(ranks, mask, n_ranks, n_classes, alpha, jpz_report))
    write_report(out / "jpz.csv", jpz_report)
    print(f"[2/3] ✓ rank histogram ({n_classes} classes of {n_ranks} ranks)")

    n_roc_failed = 0
    for t in thresholds:
        probs = forecast.exceedance(t)[:, mask]
        events = (y[:, mask] > t).astype(np.int8)
        path = out / f"roc_t{t:g}.csv"
        try:
            curve = roc_curve(probs, events)
        except DomainError as e:
            logger.warning("ROC at threshold %g undefined: %s", t, e)
            write_report(path, Report(["threshold", "false_alarm_rate", "hit_rate"]))
            summary[f"auc_t{t:g}"] = float("nan")
            n_roc_failed += 1
            continue
        write_report(path, roc_report(curve))
        summary[f"auc_t{t:g}"] = curve.auc
    print(f"[3/3] ✓ ROC at thresholds {', '.join(f'{t:g}' for t in thresholds)}")

    report = Report(["metric", "value"])
    for key, value in summary.items():
        report.add(metric=key, value=value)
    write_report(out / "summary.csv", report)
    closing(start, 3, 0)
    if n_roc_failed:
        print(f"ROC undefined (no events or no non-events) at {n_roc_failed} threshold(s)")
    return 0


def cmd_report(args) -> int:
    combined = Report(["run", "metric", "value"])
    for i, source in enumerate(args.reports, 1):
        source = Path(source)
        path = source / "summary.csv" if source.is_dir() else source
        if not path.exists():
            raise FileNotFoundError(f"no summary report at {path}")
        summary = read_report(path)
        if summary.columns != ["metric", "value"]:
            raise DomainError(f"{path}: not a verification summary")
        run = source.name if source.is_dir() else source.parent.name
        for row in summary.rows:
            combined.add(run=run, metric=row["metric"], value=row["value"])
        print(f"[{i}/{len(args.reports)}] ✓ {run} ({len(summary)} metrics)")
    write_report(args.out, combined)
    print(f"\nResults saved to: {args.out}")
    return 0


COMMANDS = {
    "datagen": cmd_datagen,
    "train": cmd_train,
    "predict": cmd_predict,
    "fit-tail": cmd_fit_tail,
    "verify": cmd_verify,
    "report": cmd_report,
}
