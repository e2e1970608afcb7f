"""DCWT interchange format: weights file + stats JSON.

Layout (all integers little-endian):

    magic "DCW1" | u16 version=1 | u32 tensor_count
    per tensor: u16 name_len | name UTF-8 | u8 dtype | u32 rows | u32 cols
                | row-major raw values

dtype tags: 0 = float32, 1 = float64, 2 = int8.  The stats file is a JSON
object mapping tensor name -> list of per-channel activation maxima.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import BadMagicError, DataFormatError, TruncatedError, UnsupportedVersionError
from .tensors import ActivationStats, WeightTensor

MAGIC = b"DCW1"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("i1")}
_TAGS = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int8"): 2}


def write_weights(path, tensors, dtype=np.float64) -> None:
    """Write tensors (WeightTensor or (name, 2-D array) pairs) to a DCWT file."""
    dtype = np.dtype(dtype)
    tag = _TAGS[dtype]
    parts = [MAGIC, struct.pack("<HI", VERSION, len(tensors))]
    for t in tensors:
        name, values = (t.name, t.values) if isinstance(t, WeightTensor) else t
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name!r}")
        rows, cols = values.shape
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<BII", tag, rows, cols))
        parts.append(np.ascontiguousarray(values, dtype=dtype.newbyteorder("<")).tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedError(f"truncated file at offset {self.pos}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_weights(path) -> list[WeightTensor]:
    """Read a DCWT weights file; values are widened to float64."""
    with open(path, "rb") as f:
        r = _Reader(f.read())
    if r.take(4) != MAGIC:
        raise BadMagicError("not a DCWT file")
    version, count = r.unpack("<HI")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported DCWT version {version}")
    out = []
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        tag, rows, cols = r.unpack("<BII")
        if tag not in _DTYPES:
            raise DataFormatError(f"{name}: unknown dtype tag {tag}")
        dt = _DTYPES[tag]
        raw = r.take(rows * cols * dt.itemsize)
        values = np.frombuffer(raw, dtype=dt).reshape(rows, cols).astype(np.float64)
        out.append(WeightTensor(name, values))
    if r.pos != len(r.buf):
        raise DataFormatError(f"{len(r.buf) - r.pos} trailing bytes after tensor data")
    return out


def write_stats(path, stats) -> None:
    """Write ActivationStats (or (name, array) pairs) as the stats JSON."""
    doc = {}
    for s in stats:
        name, cm = (s.name, s.channel_max) if isinstance(s, ActivationStats) else s
        doc[name] = np.asarray(cm, dtype=np.float64).tolist()
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def read_stats(path) -> dict[str, ActivationStats]:
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"stats file is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise DataFormatError("stats file must be a JSON object")
    return {name: ActivationStats(name, np.asarray(v, dtype=np.float64)) for name, v in doc.items()}
