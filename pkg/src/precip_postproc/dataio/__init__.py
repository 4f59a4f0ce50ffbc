"""
Deterministic persistence for grids, checkpoints, manifests and reports.

Modules:
- gridfile: GPT1 grid tensor files (YAML header, little-endian payload)
- checkpoint: U-Net checkpoints in the same framing
- manifest: dataset manifests with file roles, day split and config hash
- reports: CSV reports with fixed column order and 9-digit floats
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .gridfile import GridTensor, read_grid, write_grid
from .manifest import Manifest, config_hash, load_dataset, read_manifest, validate_manifest, write_manifest
from .reports import Report, crpss_report, rank_histogram_report, read_report, roc_report, write_report

__all__ = [
    "GridTensor",
    "Manifest",
    "Report",
    "config_hash",
    "crpss_report",
    "load_checkpoint",
    "load_dataset",
    "rank_histogram_report",
    "read_grid",
    "read_manifest",
    "read_report",
    "roc_report",
    "save_checkpoint",
    "validate_manifest",
    "write_grid",
    "write_manifest",
    "write_report",
]
