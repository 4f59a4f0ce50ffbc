"""
Plot-ready CSV reports.

A Report is a fixed column order plus rows of plain values. Floats are
rendered with 9 significant digits ("nan" for NaN), lines end with "\\n", so
an identical report always serializes to identical bytes. An empty report is
a header-only file.
"""

import csv
import math
from dataclasses import dataclass, field
from numbers import Integral, Real
from pathlib import Path

import numpy as np

from ..errors import ReportError

FLOAT_FORMAT = ".9g"


@dataclass
class Report:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)

    def add(self, **values) -> None:
        self.rows.append(values)

    def __len__(self):
        return len(self.rows)


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (Integral, np.integer)):
        return str(int(value))
    if isinstance(value, (Real, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else format(value, FLOAT_FORMAT)
    return str(value)


def write_report(path: Path | str, report: Report) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=report.columns, lineterminator="\n", extrasaction="raise")
            writer.writeheader()
            for row in report.rows:
                writer.writerow({col: format_value(row[col]) for col in report.columns})
    except (OSError, KeyError, ValueError) as e:
        raise ReportError(f"could not write report {path}: {e}") from e


def read_report(path: Path | str) -> Report:
    """Rows come back as strings."""
    path = Path(path)
    try:
        with open(path, 'r', newline='') as f:
            reader = csv.DictReader(f)
            rows = list(reader)
            return Report(list(reader.fieldnames or []), rows)
    except OSError as e:
        raise ReportError(f"could not read report {path}: {e}") from e


def crpss_report(crps_map, ref_map, skill) -> Report:
    """One row per grid point: (row, col, score, ref_score, skill)."""
    report = Report(["row", "col", "score", "ref_score", "skill"])
    H, W = np.shape(skill)
    for i in range(H):
        for j in range(W):
            report.add(row=i, col=j, score=crps_map[i, j], ref_score=ref_map[i, j], skill=skill[i, j])
    return report


def rank_histogram_report(counts, n_ranks: int) -> Report:
    counts = np.asarray(counts)
    width = n_ranks // counts.size
    report = Report(["class", "first_rank", "last_rank", "count", "frequency"])
    total = counts.sum()
    for c, n in enumerate(counts):
        report.add(
            **{"class": c + 1},
            first_rank=c * width + 1,
            last_rank=(c + 1) * width,
            count=n,
            frequency=n / total if total else math.nan,
        )
    return report


def roc_report(curve) -> Report:
    report = Report(["threshold", "false_alarm_rate", "hit_rate"])
    for p, far, hr in zip(curve.thresholds, curve.false_alarm_rate, curve.hit_rate):
        report.add(threshold=p, false_alarm_rate=far, hit_rate=hr)
    return report
