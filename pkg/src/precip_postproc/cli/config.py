"""
Experiment configuration files.

One YAML document with the sections below; every key is optional and
unknown keys are errors. Parsing goes through yaml.compose so each error
names the line of the offending key.

    seed: 0
    dataset:      H, W, n_days, ensemble_size, bias, dispersion_factor,
                  length_scale, n_vars, test_fraction
    family:       name (gtcnd | csgd), floor, upper_bound
                  (a bare "family: csgd" also works)
    tail:         activation_threshold, activation_prob, levels_to_update
    training:     base_channels, use_separable, learning_rate, batch_size,
                  epochs, n_models, clip_norm, validation_fraction
    verification: thresholds, alpha, n_classes, border, n_levels

Seed and worker count resolve as flag, then PRECIP_SEED / PRECIP_WORKERS,
then the file's seed (or the physical core count for workers).
"""

import dataclasses
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import psutil
import yaml

from ..datagen.synthetic import SyntheticConfig
from ..distributions import FAMILIES
from ..errors import ConfigError, DomainError
from ..fitting.quantiles import N_LEVELS
from ..fitting.tail import TailConfig
from ..gridnet.layers import PARAM_FLOOR
from ..gridnet.train import TrainConfig
from ..gridnet.unet import UNetConfig

SEED_ENV = "PRECIP_SEED"
WORKERS_ENV = "PRECIP_WORKERS"
DEFAULT_THRESHOLDS = (0.0, 5.0, 10.0, 20.0)


@dataclass(frozen=True)
class VerifyConfig:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    alpha: float = 0.05
    n_classes: int = 18
    border: int = 2
    n_levels: int = N_LEVELS

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not self.thresholds or any(not t >= 0.0 for t in self.thresholds):
            raise DomainError("thresholds must be a non-empty list of values >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if self.n_classes < 1 or self.border < 0 or self.n_levels < 1:
            raise DomainError("n_classes and n_levels must be >= 1, border >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: SyntheticConfig = field(default_factory=SyntheticConfig)
    tail: TailConfig = field(default_factory=TailConfig)
    unet: UNetConfig = field(default_factory=lambda: UNetConfig(in_channels=SyntheticConfig().d))
    training: TrainConfig = field(default_factory=TrainConfig)
    verification: VerifyConfig = field(default_factory=VerifyConfig)
    seed: int = 0

    @property
    def family(self) -> str:
        return self.unet.family

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(
            self,
            seed=seed,
            dataset=dataclasses.replace(self.dataset, seed=seed),
            unet=dataclasses.replace(self.unet, seed=seed),
            training=dataclasses.replace(self.training, seed=seed),
        )


# key -> accepted python types; None in the tuple allows null
_NUM = (int, float)
SCHEMA: dict[str, dict[str, tuple]] = {
    "dataset": {
        "H": (int,), "W": (int,), "n_days": (int,), "ensemble_size": (int,), "bias": _NUM,
        "dispersion_factor": _NUM, "length_scale": _NUM, "n_vars": (int,), "test_fraction": _NUM,
    },
    "family": {"name": (str,), "floor": _NUM, "upper_bound": _NUM + (None,)},
    "tail": {"activation_threshold": _NUM, "activation_prob": _NUM, "levels_to_update": (list, None)},
    "training": {
        "base_channels": (int,), "use_separable": (bool,), "learning_rate": _NUM, "batch_size": (int,),
        "epochs": (int,), "n_models": (int,), "clip_norm": _NUM + (None,), "validation_fraction": _NUM,
    },
    "verification": {"thresholds": (list,), "alpha": _NUM, "n_classes": (int,), "border": (int,), "n_levels": (int,)},
}
_NETWORK_KEYS = {"base_channels", "use_separable"}


def _line(node: yaml.Node) -> int:
    return node.start_mark.line + 1


def _value(loader: yaml.SafeLoader, node: yaml.Node):
    return loader.construct_object(node, deep=True)


def _check_type(path: Path, key_node: yaml.Node, value, allowed: tuple) -> None:
    if value is None and None in allowed:
        return
    types = tuple(t for t in allowed if t is not None)
    # bool is an int subclass
    if isinstance(value, bool) and bool not in types:
        ok = False
    else:
        ok = isinstance(value, types)
    if not ok:
        names = "/".join("null" if t is None else t.__name__ for t in allowed)
        raise ConfigError(path, _line(key_node), f"{key_node.value}: expected {names}, got {value!r}")


def _section(path: Path, loader: yaml.SafeLoader, name: str, node: yaml.Node) -> tuple[dict, dict[str, int]]:
    if isinstance(node, yaml.ScalarNode) and node.tag == "tag:yaml.org,2002:null":
        return {}, {}
    if name == "family" and isinstance(node, yaml.ScalarNode):
        return {"name": node.value}, {"name": _line(node)}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(path, _line(node), f"section {name} must be a mapping")
    schema = SCHEMA[name]
    values, lines = {}, {}
    for key_node, value_node in node.value:
        key = key_node.value
        if key not in schema:
            raise ConfigError(path, _line(key_node), f"unknown key {key!r} in section {name}")
        if key in values:
            raise ConfigError(path, _line(key_node), f"duplicate key {key!r} in section {name}")
        value = _value(loader, value_node)
        _check_type(path, key_node, value, schema[key])
        values[key] = value
        lines[key] = _line(key_node)
    return values, lines


def _build(path: Path, name: str, lines: dict[str, int], section_line: int, factory):
    """Construct a config dataclass, pinning validation errors to a line."""
    try:
        return factory()
    except (DomainError, TypeError) as e:
        text = str(e)
        line = next((ln for key, ln in lines.items() if re.search(rf"\b{re.escape(key)}\b", text)), section_line)
        raise ConfigError(path, line, f"{name}: {text}") from e


def parse_config(text: str, path: Path | str = "<config>") -> ExperimentConfig:
    path = Path(path)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else 1
        raise ConfigError(path, line, f"invalid YAML: {e.problem}") from e
    if root is None:
        return ExperimentConfig()
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(path, _line(root), "config must be a mapping of sections")

    loader = yaml.SafeLoader("")
    sections: dict[str, dict] = {name: {} for name in SCHEMA}
    lines: dict[str, dict[str, int]] = {name: {} for name in SCHEMA}
    section_lines: dict[str, int] = {name: 1 for name in SCHEMA}
    seed = 0
    for key_node, value_node in root.value:
        name = key_node.value
        if name == "seed":
            seed = _value(loader, value_node)
            if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
                raise ConfigError(path, _line(key_node), f"seed must be a non-negative integer, got {seed!r}")
            continue
        if name not in SCHEMA:
            raise ConfigError(path, _line(key_node), f"unknown section {name!r}")
        sections[name], lines[name] = _section(path, loader, name, value_node)
        section_lines[name] = _line(key_node)

    fam = sections["family"]
    family = fam.get("name", "gtcnd")
    if family not in FAMILIES:
        raise ConfigError(path, lines["family"].get("name", section_lines["family"]), f"unknown family {family!r}")
    dataset = _build(path, "dataset", lines["dataset"], section_lines["dataset"],
                     lambda: SyntheticConfig(**sections["dataset"], family=family, seed=seed))
    tail = _build(path, "tail", lines["tail"], section_lines["tail"],
                  lambda: TailConfig(family=family, **sections["tail"]))
    train_keys = {k: v for k, v in sections["training"].items() if k not in _NETWORK_KEYS}
    net_keys = {k: v for k, v in sections["training"].items() if k in _NETWORK_KEYS}
    unet = _build(path, "family", {**lines["family"], **lines["training"]}, section_lines["family"],
                  lambda: UNetConfig(
                      in_channels=dataset.d,
                      family=family,
                      seed=seed,
                      floor=fam.get("floor", PARAM_FLOOR),
                      upper_bound=fam.get("upper_bound"),
                      **net_keys,
                  ))
    training = _build(path, "training", lines["training"], section_lines["training"],
                      lambda: TrainConfig(**train_keys, seed=seed))
    verification = _build(path, "verification", lines["verification"], section_lines["verification"],
                          lambda: VerifyConfig(**sections["verification"]))
    return ExperimentConfig(dataset, tail, unet, training, verification, seed)


def load_config(path: Path | str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(), path)


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = int(raw)
    except ValueError as e:
        raise DomainError(f"{name} must be an integer, got {raw!r}") from e
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return value


def resolve_seed(flag: int | None, config: ExperimentConfig) -> int:
    if flag is not None:
        return flag
    env = _env_int(SEED_ENV)
    return config.seed if env is None else env


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise DomainError("--workers must be >= 1")
        return flag
    env = _env_int(WORKERS_ENV)
    if env:
        return env
    return psutil.cpu_count(logical=False) or 1
