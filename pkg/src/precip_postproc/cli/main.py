#!/usr/bin/env python3
"""
Command-line entry point.

Usage:
    precip-postproc datagen --config exp.yaml --out data/
    precip-postproc train data/ --config exp.yaml --models 10 --out ckpt/
    precip-postproc predict ckpt/ data/ --out pred/
    precip-postproc fit-tail pred/quantiles.gpt --config exp.yaml --out pred/quantiles_tail.gpt
    precip-postproc verify pred/quantiles.gpt data/observations.gpt --mask data/mask.gpt \\
        --reference data/raw_ensemble.gpt --thresholds 0,5,10,20 --out reports/dru
    precip-postproc report reports/dru reports/raw --out summary.csv

Exit codes: 0 success, 1 validation error, 2 runtime failure. Errors print a
single stderr line starting with error[validation]: or error[runtime]:.
"""

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, DomainError, GridFormatError
from ..fitting.quantiles import N_LEVELS
from .commands import COMMANDS

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

VALIDATION_ERRORS = (ConfigError, DomainError, GridFormatError, FileNotFoundError, NotADirectoryError)


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as one machine-parseable line and exit code 1."""

    def error(self, message):
        print(f"error[validation]: {self.prog}: {message}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)


def thresholds(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid threshold list {text!r}")
    if not values or any(not v >= 0.0 for v in values):
        raise argparse.ArgumentTypeError("thresholds must be comma-separated values >= 0")
    return values


def _one_line(e: BaseException) -> str:
    return " ".join(str(e).split())


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(asctime)s] %(levelname)s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
        force=True,
    )


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Experiment YAML file")
    common.add_argument("--seed", type=int, default=None, help="Seed (overrides PRECIP_SEED and the config)")
    common.add_argument("--workers", "-j", type=int, default=None,
                        help="Parallel workers (default: PRECIP_WORKERS or the physical core count)")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging and progress bars")

    parser = ArgumentParser(prog="precip-postproc", description="Gridded precipitation postprocessing pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("datagen", parents=[common], help="Generate a synthetic dataset")
    p.add_argument("--out", type=Path, required=True, help="Dataset directory")

    p = sub.add_parser("train", parents=[common], help="Train U-Net models on a dataset")
    p.add_argument("dataset", type=Path, help="Dataset directory")
    p.add_argument("--models", type=int, default=None, help="Number of models (overrides training.n_models)")
    p.add_argument("--out", type=Path, required=True, help="Checkpoint directory")

    p = sub.add_parser("predict", parents=[common], help="Aggregated quantile forecasts from checkpoints")
    p.add_argument("checkpoints", type=Path, help="Checkpoint directory")
    p.add_argument("dataset", type=Path, help="Dataset directory")
    p.add_argument("--split", default="test", help="Dataset split to predict (default: test)")
    p.add_argument("--levels", type=int, default=None, help=f"Number of quantile levels (default: {N_LEVELS})")
    p.add_argument("--out", type=Path, required=True, help="Output directory")

    p = sub.add_parser("fit-tail", parents=[common], help="Tail extension of a quantile forecast file")
    p.add_argument("forecasts", type=Path, help="Quantile forecast grid file")
    p.add_argument("--family", choices=["gtcnd", "csgd"], default=None, help="Fitted family (overrides the config)")
    p.add_argument("--out", type=Path, required=True, help="Output grid file")

    p = sub.add_parser("verify", parents=[common], help="Scores, rank histograms and ROC curves")
    p.add_argument("forecasts", type=Path, help="Forecast grid file (quantiles, params or ensemble)")
    p.add_argument("observations", type=Path, help="Observation grid file")
    p.add_argument("--mask", type=Path, default=None, help="Censor mask grid file (default: all points minus the border)")
    p.add_argument("--reference", type=Path, default=None, help="Reference forecast for CRPSS")
    p.add_argument("--thresholds", type=thresholds, default=None, help="Comma-separated thresholds (default: 0,5,10,20)")
    p.add_argument("--alpha", type=float, default=None, help="Flatness test level (default: 0.05)")
    p.add_argument("--out", type=Path, required=True, help="Report directory")

    p = sub.add_parser("report", parents=[common], help="Combine verification summaries")
    p.add_argument("reports", type=Path, nargs="+", help="Report directories or summary.csv files")
    p.add_argument("--out", type=Path, required=True, help="Combined CSV")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        code = COMMANDS[args.command](args)
    except VALIDATION_ERRORS as e:
        print(f"error[validation]: {_one_line(e)}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        logging.getLogger(__name__).debug("runtime failure", exc_info=True)
        print(f"error[runtime]: {e.__class__.__name__}: {_one_line(e)}", file=sys.stderr)
        return EXIT_RUNTIME
    return code


if __name__ == "__main__":
    sys.exit(main())
