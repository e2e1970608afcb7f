"""Writers for the DCWT interchange pair: weights file + stats JSON.

Weights layout (all integers little-endian):

    magic "DCW1" | u16 version=1 | u32 tensor_count
    per tensor: u16 name_len | name UTF-8 | u8 dtype | u32 rows | u32 cols
                | row-major raw values

This exporter only emits dtype tag 0 (float32).  The stats file is a
JSON object mapping tensor name -> list of per-channel activation
maxima.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"DCW1"
VERSION = 1
DTYPE_F32 = 0


def write_weights(path, tensors) -> None:
    """Write (name, 2-D array) pairs as a float32 DCWT file."""
    parts = [MAGIC, struct.pack("<HI", VERSION, len(tensors))]
    for name, values in tensors:
        v = np.ascontiguousarray(values, dtype="<f4")
        if v.ndim != 2:
            raise ValueError(f"{name}: expected a 2-D matrix, got shape {v.shape}")
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name!r}")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<BII", DTYPE_F32, v.shape[0], v.shape[1]))
        parts.append(v.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def write_stats(path, stats: dict) -> None:
    doc = {name: np.asarray(cm, dtype=np.float64).tolist() for name, cm in stats.items()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
