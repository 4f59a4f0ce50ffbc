"""
Model checkpoints.

Same framing as grid files with magic b"GCK1": a uint64 header length, a
YAML header holding the network config and the offsets/shapes of every
parameter view and buffer, then one little-endian f64 block with the
parameter vector followed by the buffers in header order. Loading restores
the parameters bit for bit.
"""

import dataclasses
import struct
from pathlib import Path

import numpy as np
import yaml

from ..errors import DomainError, GridFormatError
from ..gridnet.unet import ModelParams, UNetConfig, UNetModel

MAGIC = b"GCK1"
PREFIX = struct.Struct("<4sQ")
F64 = np.dtype("<f8")


def save_checkpoint(path: Path | str, model: UNetModel, attrs: dict | None = None) -> None:
    store = model.params
    buffers, offset = {}, store.n_params
    for name in sorted(store.buffers):
        arr = np.asarray(store.buffers[name], dtype=np.float64)
        buffers[name] = [offset, list(arr.shape)]
        offset += arr.size
    header = {
        "attrs": attrs or {},
        "buffers": buffers,
        "config": dataclasses.asdict(model.config),
        "layout": {name: [off, list(shape)] for name, (off, shape) in store.layout.items()},
        "n_values": offset,
    }
    head = yaml.safe_dump(header, sort_keys=True, default_flow_style=None).encode("utf-8")
    blocks = [store.values] + [np.asarray(store.buffers[name], dtype=np.float64).ravel() for name in buffers]
    payload = np.concatenate(blocks).astype(F64).tobytes()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(PREFIX.pack(MAGIC, len(head)) + head + payload)


def load_checkpoint(path: Path | str) -> UNetModel:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < PREFIX.size:
        raise GridFormatError(path, len(raw), "file shorter than the fixed prefix")
    magic, n_header = PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise GridFormatError(path, 0, f"bad magic {magic!r}")
    if PREFIX.size + n_header > len(raw):
        raise GridFormatError(path, 4, f"header length {n_header} exceeds file size {len(raw)}")
    try:
        header = yaml.safe_load(raw[PREFIX.size:PREFIX.size + n_header].decode("utf-8"))
        config = UNetConfig(**header["config"])
        n_values = int(header["n_values"])
    except (UnicodeDecodeError, yaml.YAMLError, KeyError, TypeError, DomainError) as e:
        raise GridFormatError(path, PREFIX.size, f"invalid checkpoint header ({e})") from e

    start = PREFIX.size + n_header
    if len(raw) - start != n_values * F64.itemsize:
        raise GridFormatError(path, len(raw), f"payload holds {len(raw) - start} bytes, expected {n_values * F64.itemsize}")
    flat = np.frombuffer(raw, dtype=F64, offset=start).astype(np.float64)

    layout = {name: (int(off), tuple(shape)) for name, (off, shape) in header["layout"].items()}
    n_params = sum(int(np.prod(shape)) for _, shape in layout.values())
    buffers = {
        name: flat[off:off + int(np.prod(shape))].reshape(shape).copy()
        for name, (off, shape) in header["buffers"].items()
    }
    return UNetModel(config, ModelParams(flat[:n_params].copy(), layout, buffers))
