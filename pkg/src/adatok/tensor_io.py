"""Bit-exact reader/writer for the ATSR tensor container and score sidecars.

ATSR layout (all integers little-endian):

    offset 0   magic   4 bytes, ASCII "ATSR"
    offset 4   version u8, currently 1
    offset 5   dtype   u8: 0 = f16, 1 = f32, 2 = u8
    offset 6   rank    u8: 2 or 3
    offset 7   pad     u8, must be 0 (fixed 8-byte prologue so the payload
                       offset is computable without parsing dims)
    offset 8   dims    rank x u32
    then       payload row-major values in dtype

The score sidecar is a text file with one "index confidence" pair per line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, TruncationError, UnsupportedDtype

MAGIC = b"ATSR"
VERSION = 1

# dtype tag -> (numpy dtype, bytes per element)
_DTYPES = {0: np.dtype("<f2"), 1: np.dtype("<f4"), 2: np.dtype("u1")}
_TAGS = {np.dtype("float16"): 0, np.dtype("float32"): 1, np.dtype("uint8"): 2}

DTYPE_NAMES = {0: "f16", 1: "f32", 2: "u8"}
DTYPE_TAGS = {name: tag for tag, name in DTYPE_NAMES.items()}


@dataclass(frozen=True)
class TensorFile:
    """An in-memory ATSR tensor: native-dtype values plus the header dtype tag."""

    values: np.ndarray
    dtype_tag: int

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def dtype_name(self) -> str:
        return DTYPE_NAMES[self.dtype_tag]

    def working(self) -> np.ndarray:
        """Values widened to working precision: f16 -> f32 (lossless), others as-is."""
        if self.dtype_tag == 0:
            return self.values.astype(np.float32)
        return self.values

    @classmethod
    def from_array(cls, values: np.ndarray) -> "TensorFile":
        arr = np.ascontiguousarray(values)
        key = arr.dtype.newbyteorder("=")
        if key not in _TAGS:
            raise UnsupportedDtype(f"no ATSR dtype tag for {arr.dtype}")
        tag = _TAGS[key]
        return cls(values=arr.astype(_DTYPES[tag]), dtype_tag=tag)


def _check_dims(dims: tuple[int, ...]) -> None:
    if len(dims) not in (2, 3):
        raise FormatError(f"rank must be 2 or 3, got {len(dims)}")
    for i, d in enumerate(dims):
        if d < 0 or d > 0xFFFFFFFF:
            raise FormatError(f"dim {i} out of u32 range: {d}")
        # only a rank-3 leading dim may be zero (an empty mask stack)
        if d == 0 and not (len(dims) == 3 and i == 0):
            raise FormatError(f"dim {i} is zero")


def write_tensor(t: TensorFile, path) -> None:
    """Write `t` to `path`. Byte-for-byte deterministic for identical inputs."""
    _check_dims(t.dims)
    arr = np.ascontiguousarray(t.values, dtype=_DTYPES[t.dtype_tag])
    header = MAGIC + struct.pack("<BBBB", VERSION, t.dtype_tag, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(dims)
            f.write(arr.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_tensor(path) -> TensorFile:
    """Parse an ATSR file. Raises FormatError/TruncationError/UnsupportedDtype."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return parse_tensor(blob, name=str(path))


def parse_tensor(blob: bytes, name: str = "<bytes>") -> TensorFile:
    if len(blob) < 8:
        raise TruncationError(f"{name}: {len(blob)} bytes is shorter than the 8-byte prologue")
    if blob[:4] != MAGIC:
        raise FormatError(f"{name}: bad magic {blob[:4]!r}")
    version, dtype_tag, rank, pad = struct.unpack_from("<BBBB", blob, 4)
    if version != VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    if dtype_tag not in _DTYPES:
        raise UnsupportedDtype(f"{name}: unknown dtype tag {dtype_tag}")
    if rank not in (2, 3):
        raise FormatError(f"{name}: rank must be 2 or 3, got {rank}")
    if pad != 0:
        raise FormatError(f"{name}: prologue pad byte is {pad}, must be 0")
    dims_end = 8 + 4 * rank
    if len(blob) < dims_end:
        raise TruncationError(f"{name}: header truncated in dims")
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    _check_dims(dims)
    dtype = _DTYPES[dtype_tag]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = blob[dims_end:]
    if len(payload) < expected:
        raise TruncationError(
            f"{name}: payload is {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise FormatError(f"{name}: {len(payload) - expected} trailing bytes after payload")
    values = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return TensorFile(values=values, dtype_tag=dtype_tag)


def write_sidecar(confidences, path) -> None:
    """Write per-mask confidences as "index confidence" lines, ascending index."""
    lines = []
    for i, c in enumerate(confidences):
        c = float(c)
        if not 0.0 <= c <= 1.0:
            raise FormatError(f"confidence {c} for mask {i} outside [0, 1]")
        lines.append(f"{i} {c!r}\n")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(lines)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_sidecar(path) -> dict[int, float]:
    """Parse a score sidecar file into {mask_index: confidence}."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return parse_sidecar(text, name=str(path))


def parse_sidecar(text: str, name: str = "<text>") -> dict[int, float]:
    scores: dict[int, float] = {}
    path = name
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'index confidence', got {line!r}")
        try:
            idx = int(parts[0])
            conf = float(parts[1])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if idx < 0:
            raise FormatError(f"{path}:{lineno}: negative mask index {idx}")
        if not 0.0 <= conf <= 1.0:
            raise FormatError(f"{path}:{lineno}: confidence {conf} outside [0, 1]")
        if idx in scores:
            raise FormatError(f"{path}:{lineno}: duplicate record for mask {idx}")
        scores[idx] = conf
    return scores


def validate_sidecar(scores: dict[int, float], num_masks: int) -> None:
    """Every mask index in [0, num_masks) must have exactly one record."""
    expected = set(range(num_masks))
    got = set(scores)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise FormatError(
            f"sidecar does not match mask tensor: missing indices {missing}, extra {extra}"
        )
