"""
GPT1 grid tensor files.

Byte layout (all integers little-endian):

    offset 0        4 bytes   magic b"GPT1"
    offset 4        8 bytes   uint64 header length N
    offset 12       N bytes   UTF-8 YAML header, keys sorted:
                                attrs       free-form mapping (may be empty)
                                channels    names of the last axis
                                dims        list of positive ints
                                dtype       "f32" or "f64"
                                endianness  "little"
    offset 12 + N   payload   row-major values, prod(dims) × itemsize bytes

Nothing may follow the payload. Any violation raises GridFormatError with
the byte offset where validation failed; no partial tensor is returned.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import DomainError, GridFormatError

MAGIC = b"GPT1"
PREFIX = struct.Struct("<4sQ")
DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
MAX_HEADER = 1 << 24


@dataclass
class GridTensor:
    data: np.ndarray
    channels: list[str]
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float64)
        if self.data.ndim < 1 or any(n < 1 for n in self.data.shape):
            raise DomainError(f"grid dims must all be >= 1, got {self.data.shape}")
        self.channels = [str(c) for c in self.channels]
        if len(self.channels) != self.data.shape[-1]:
            raise DomainError(f"{len(self.channels)} channel names for {self.data.shape[-1]} channels")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype_tag(self) -> str:
        return "f32" if self.data.dtype == np.float32 else "f64"

    def channel(self, name: str) -> np.ndarray:
        return self.data[..., self.channels.index(name)]


def create_header(tensor: GridTensor) -> bytes:
    header = {
        "attrs": tensor.attrs,
        "channels": tensor.channels,
        "dims": [int(n) for n in tensor.dims],
        "dtype": tensor.dtype_tag,
        "endianness": "little",
    }
    return yaml.safe_dump(header, sort_keys=True, default_flow_style=None, allow_unicode=True).encode("utf-8")


def encode_grid(tensor: GridTensor) -> bytes:
    header = create_header(tensor)
    payload = np.ascontiguousarray(tensor.data, dtype=DTYPES[tensor.dtype_tag]).tobytes()
    return PREFIX.pack(MAGIC, len(header)) + header + payload


def write_grid(path: Path | str, tensor: GridTensor) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_grid(tensor))


def _parse_header(path: Path, raw: bytes) -> dict:
    offset = PREFIX.size
    try:
        header = yaml.safe_load(raw.decode("utf-8"))
    except (UnicodeDecodeError, yaml.YAMLError) as e:
        raise GridFormatError(path, offset, f"unreadable header ({e.__class__.__name__})") from e
    if not isinstance(header, dict):
        raise GridFormatError(path, offset, "header is not a mapping")
    missing = {"channels", "dims", "dtype", "endianness"} - set(header)
    if missing:
        raise GridFormatError(path, offset, f"header lacks {sorted(missing)}")
    if header["endianness"] != "little":
        raise GridFormatError(path, offset, f"unsupported endianness {header['endianness']!r}")
    if header["dtype"] not in DTYPES:
        raise GridFormatError(path, offset, f"unsupported dtype {header['dtype']!r}")
    dims = header["dims"]
    if not (isinstance(dims, list) and dims and all(isinstance(n, int) and n >= 1 for n in dims)):
        raise GridFormatError(path, offset, f"invalid dims {dims!r}")
    if not isinstance(header["channels"], list) or len(header["channels"]) != dims[-1]:
        raise GridFormatError(path, offset, "channel names do not match the last dim")
    return header


def decode_grid(path: Path | str, raw: bytes, as_float64: bool = False) -> GridTensor:
    path = Path(path)
    if len(raw) < PREFIX.size:
        raise GridFormatError(path, len(raw), "file shorter than the fixed prefix")
    magic, n_header = PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise GridFormatError(path, 0, f"bad magic {magic!r}")
    if n_header > MAX_HEADER or PREFIX.size + n_header > len(raw):
        raise GridFormatError(path, 4, f"header length {n_header} exceeds file size {len(raw)}")

    header = _parse_header(path, raw[PREFIX.size:PREFIX.size + n_header])
    dtype = DTYPES[header["dtype"]]
    start = PREFIX.size + n_header
    expected = int(np.prod(header["dims"])) * dtype.itemsize
    found = len(raw) - start
    if found < expected:
        raise GridFormatError(path, len(raw), f"truncated payload: {found} of {expected} bytes")
    if found > expected:
        raise GridFormatError(path, start + expected, f"{found - expected} trailing bytes after payload")

    data = np.frombuffer(raw, dtype=dtype, count=expected // dtype.itemsize, offset=start).reshape(header["dims"])
    data = data.astype(np.float64) if as_float64 else data.astype(dtype.newbyteorder("="))
    return GridTensor(data, header["channels"], dict(header.get("attrs") or {}))


def read_grid(path: Path | str, as_float64: bool = False) -> GridTensor:
    """Read and validate a GPT1 file; `as_float64` widens f32 payloads exactly."""
    path = Path(path)
    return decode_grid(path, path.read_bytes(), as_float64)
