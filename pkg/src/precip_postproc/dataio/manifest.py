"""
Dataset manifests.

manifest.yaml sits next to the grid files of a dataset and lists them by
role, the train/test day split and the generating config with its SHA-256
hash (of the sorted-key YAML rendering).
"""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import DomainError, GridFormatError
from .gridfile import GridTensor, read_grid

MANIFEST_NAME = "manifest.yaml"
ROLES = ("predictors", "observations", "truth", "raw_ensemble", "constants", "mask")


def config_hash(config: dict) -> str:
    text = yaml.safe_dump(config, sort_keys=True, default_flow_style=None)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class Manifest:
    name: str
    files: dict[str, str]
    split: dict[str, list[int]]
    config: dict = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = config_hash(self.config)
        unknown = set(self.files) - set(ROLES)
        if unknown:
            raise DomainError(f"unknown file roles {sorted(unknown)}")
        train, test = set(self.split.get("train", [])), set(self.split.get("test", []))
        if train & test:
            raise DomainError("train and test days overlap")

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "config_hash": self.config_hash,
            "files": dict(self.files),
            "name": self.name,
            "split": {k: [int(i) for i in v] for k, v in self.split.items()},
        }


def write_manifest(directory: Path | str, manifest: Manifest) -> Path:
    path = Path(directory) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(manifest.to_dict(), sort_keys=True, default_flow_style=None))
    return path


def read_manifest(directory: Path | str) -> Manifest:
    directory = Path(directory)
    path = directory / MANIFEST_NAME if directory.is_dir() else directory
    if not path.exists():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict) or not {"name", "files", "split"} <= set(data):
        raise DomainError(f"{path}: not a dataset manifest")
    manifest = Manifest(data["name"], data["files"], data["split"], data.get("config") or {}, data.get("config_hash", ""))
    if manifest.config and manifest.config_hash != config_hash(manifest.config):
        raise DomainError(f"{path}: config hash does not match the stored config")
    return manifest


def validate_manifest(directory: Path | str, manifest: Manifest | None = None) -> dict[str, GridTensor]:
    """Check every referenced file exists and parses; returns the tensors by role."""
    directory = Path(directory)
    manifest = manifest or read_manifest(directory)
    tensors = {}
    for role, name in manifest.files.items():
        path = directory / name
        if not path.exists():
            raise FileNotFoundError(f"manifest references missing file {path}")
        tensors[role] = read_grid(path)
    n_days = tensors["observations"].dims[0] if "observations" in tensors else None
    if n_days is not None:
        days = [d for v in manifest.split.values() for d in v]
        if any(not 0 <= d < n_days for d in days):
            raise GridFormatError(directory / manifest.files["observations"], 0, f"split refers to days outside 0..{n_days - 1}")
    return tensors


def load_dataset(directory: Path | str) -> tuple[Manifest, dict[str, GridTensor]]:
    manifest = read_manifest(directory)
    return manifest, validate_manifest(directory, manifest)
