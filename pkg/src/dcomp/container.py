"""Chunked container format "DCC1" for quantized models.

Outer layout (all little-endian, normative):

    magic "DCC1" | u16 version | u32 header_len | header
    | u32 chunk_count | chunk table | chunk payloads

Chunk table entry: u8 codec (0 = store, 1 = ans) | u64 file_offset
| u64 comp_len | u64 uncomp_len | u32 crc32-of-uncompressed.

The header carries the tensor directory (names, dims, w_scale, alpha,
per-channel scale vector and activation maxima as f32) followed by a
CRC32 of the directory bytes.  Scale vectors round-trip at f32
precision; the int8 payloads themselves are bit-exact.  Tensors serialize as row-major int8,
concatenated in directory order, then split into fixed-size chunks; the
last chunk may be short.  Every region of the file is covered by some
check (magic, version, header CRC, offset contiguity, length cross-sums,
per-chunk CRC), so any single-byte mutation is rejected.

Chunks are independent; DCOMP_THREADS caps how many are compressed or
decompressed concurrently.
"""

from __future__ import annotations

import dataclasses
import math
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import ans
from .errors import (
    BadMagicError,
    ChecksumError,
    DataFormatError,
    DcompError,
    TruncatedError,
    UnsupportedVersionError,
)
from .scaling import QuantizedTensor, ScaleVector
from .tensors import ActivationStats

MAGIC = b"DCC1"
VERSION = 1
MIN_CHUNK_SIZE = 4096
DEFAULT_CHUNK_SIZE = 16 * 2**20

CODEC_STORE = 0
CODEC_ANS = 1

_ENTRY = struct.Struct("<BQQQI")


def thread_count() -> int:
    env = os.environ.get("DCOMP_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise DcompError(f"DCOMP_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclasses.dataclass(frozen=True)
class ModelBundle:
    tensors: list[QuantizedTensor]
    stats: dict[str, ActivationStats]
    chunk_size: int = DEFAULT_CHUNK_SIZE


@dataclasses.dataclass(frozen=True)
class ChunkEntry:
    codec: int
    file_offset: int
    comp_len: int
    uncomp_len: int
    crc32: int


@dataclasses.dataclass(frozen=True)
class ContainerInfo:
    chunk_size: int
    directory: list[tuple[str, int, int, float, float]]  # name, rows, cols, w_scale, alpha
    chunks: list[ChunkEntry]
    file_size: int

    @property
    def total_uncompressed(self) -> int:
        return sum(c.uncomp_len for c in self.chunks)


def _stats_by_name(stats) -> dict[str, ActivationStats]:
    if isinstance(stats, dict):
        return stats
    return {s.name: s for s in stats}


def _header_body(tensors, stats_map, chunk_size: int) -> bytes:
    parts = [struct.pack("<II", chunk_size, len(tensors))]
    for t in tensors:
        st = stats_map.get(t.name)
        if st is None:
            raise DcompError(f"missing activation stats for tensor {t.name!r}")
        if len(st.channel_max) != t.cols:
            raise DcompError(f"stats length {len(st.channel_max)} != cols {t.cols} for tensor {t.name!r}")
        nb = t.name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<IIdd", t.rows, t.cols, t.w_scale, t.scale_vec.alpha))
        parts.append(t.scale_vec.s.astype("<f4").tobytes())
        parts.append(st.channel_max.astype("<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def _serialize_payload(tensors) -> np.ndarray:
    if not tensors:
        return np.empty(0, dtype=np.uint8)
    return np.concatenate([t.qvalues.reshape(-1).view(np.uint8) for t in tensors])


def _plan_mask(plan, n_chunks: int) -> np.ndarray:
    if plan is None:
        return np.ones(n_chunks, dtype=bool)
    mask = np.asarray(getattr(plan, "compressed_mask", plan), dtype=bool)
    if mask.shape != (n_chunks,):
        raise DcompError(f"plan covers {mask.size} chunks, container has {n_chunks}")
    return mask


def pack(tensors, stats, chunk_size: int = DEFAULT_CHUNK_SIZE, plan=None) -> bytes:
    """Serialize quantized tensors into a DCC1 byte string.

    `plan` selects per-chunk codecs (None = compress everything); a chunk
    whose compressed form would not shrink is stored raw regardless.
    """
    if chunk_size < MIN_CHUNK_SIZE:
        raise DcompError(f"chunk_size must be >= {MIN_CHUNK_SIZE}, got {chunk_size}")
    names = [t.name for t in tensors]
    if len(set(names)) != len(names):
        raise DcompError("duplicate tensor names")
    header = _header_body(tensors, _stats_by_name(stats), chunk_size)
    payload = _serialize_payload(tensors)
    n_chunks = math.ceil(payload.size / chunk_size)
    mask = _plan_mask(plan, n_chunks)

    raws = [payload[i * chunk_size : (i + 1) * chunk_size] for i in range(n_chunks)]
    todo = [i for i in range(n_chunks) if mask[i]]
    workers = min(thread_count(), len(todo)) if todo else 0
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blobs = dict(zip(todo, pool.map(ans.compress_blob, (raws[i] for i in todo))))
    else:
        blobs = {i: ans.compress_blob(raws[i]) for i in todo}

    entries = []
    payloads = []
    offset = len(MAGIC) + 2 + 4 + len(header) + 4 + n_chunks * _ENTRY.size
    for i, raw in enumerate(raws):
        blob = blobs.get(i)
        if blob is not None and len(blob) < raw.size:
            codec, data = CODEC_ANS, blob
        else:
            codec, data = CODEC_STORE, raw.tobytes()
        entries.append(_ENTRY.pack(codec, offset, len(data), raw.size, zlib.crc32(raw)))
        payloads.append(data)
        offset += len(data)

    return b"".join(
        [MAGIC, struct.pack("<HI", VERSION, len(header)), header, struct.pack("<I", n_chunks)]
        + entries
        + payloads
    )


def write_container(path, tensors, stats, chunk_size: int = DEFAULT_CHUNK_SIZE, plan=None) -> None:
    with open(path, "wb") as f:
        f.write(pack(tensors, stats, chunk_size=chunk_size, plan=plan))


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


def _parse_header(header: bytes):
    if len(header) < 4:
        raise DataFormatError("header too small to hold its checksum")
    body, stored = header[:-4], struct.unpack("<I", header[-4:])[0]
    if zlib.crc32(body) != stored:
        raise ChecksumError(-1, "header checksum mismatch")
    r = _Reader(body)
    chunk_size, tensor_count = r.unpack("<II")
    if chunk_size < 1:
        raise DataFormatError("invalid chunk size 0")
    directory = []
    for _ in range(tensor_count):
        (name_len,) = r.unpack("<H")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataFormatError(f"tensor name is not valid UTF-8: {e}") from None
        rows, cols, w_scale, alpha = r.unpack("<IIdd")
        if rows < 1 or cols < 1:
            raise DataFormatError(f"{name}: invalid dims {rows}x{cols}")
        if not (np.isfinite(w_scale) and w_scale > 0):
            raise DataFormatError(f"{name}: invalid w_scale {w_scale}")
        s = np.frombuffer(r.take(4 * cols), dtype="<f4").astype(np.float64)
        cm = np.frombuffer(r.take(4 * cols), dtype="<f4").astype(np.float64)
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise DataFormatError(f"{name}: scale vector not positive finite")
        if np.any(cm < 0) or not np.all(np.isfinite(cm)):
            raise DataFormatError(f"{name}: channel maxima not finite non-negative")
        directory.append((name, rows, cols, w_scale, alpha, s, cm))
    if r.pos != len(body):
        raise DataFormatError(f"{len(body) - r.pos} stray bytes in header")
    names = [d[0] for d in directory]
    if len(set(names)) != len(names):
        raise DataFormatError("duplicate tensor names in header")
    return chunk_size, directory


def _parse_structure(data: bytes):
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise BadMagicError("not a DCC1 container")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")
    (header_len,) = r.unpack("<I")
    header = r.take(header_len)
    chunk_size, directory = _parse_header(header)
    (chunk_count,) = r.unpack("<I")
    entries = [ChunkEntry(*_ENTRY.unpack(r.take(_ENTRY.size))) for _ in range(chunk_count)]

    expected = r.pos
    for i, e in enumerate(entries):
        if e.codec not in (CODEC_STORE, CODEC_ANS):
            raise DataFormatError(f"chunk {i}: unknown codec {e.codec}")
        if e.file_offset != expected:
            raise DataFormatError(f"chunk {i}: offset {e.file_offset}, expected {expected}")
        if e.codec == CODEC_STORE and e.comp_len != e.uncomp_len:
            raise DataFormatError(f"chunk {i}: store codec with comp_len != uncomp_len")
        if e.uncomp_len == 0:
            raise DataFormatError(f"chunk {i}: empty chunk")
        last = i == chunk_count - 1
        if (not last and e.uncomp_len != chunk_size) or e.uncomp_len > chunk_size:
            raise DataFormatError(f"chunk {i}: uncompressed length {e.uncomp_len} breaks chunking")
        expected += e.comp_len
    if expected > len(data):
        raise TruncatedError(f"chunk payloads extend past end of file ({expected} > {len(data)})")
    if expected < len(data):
        raise DataFormatError(f"{len(data) - expected} trailing bytes after last chunk")

    total = sum(e.uncomp_len for e in entries)
    want = sum(rows * cols for _, rows, cols, *_ in directory)
    if total != want:
        raise DataFormatError(f"chunks carry {total} bytes, directory declares {want}")
    return chunk_size, directory, entries


def inspect(data) -> ContainerInfo:
    """Validate structure (no payload decode) and describe the container."""
    data = _file_bytes(data)
    chunk_size, directory, entries = _parse_structure(data)
    return ContainerInfo(
        chunk_size=chunk_size,
        directory=[(n, r, c, ws, a) for n, r, c, ws, a, _, _ in directory],
        chunks=entries,
        file_size=len(data),
    )


def _file_bytes(data) -> bytes:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return bytes(data)
    with open(data, "rb") as f:
        return f.read()


def unpack(data) -> ModelBundle:
    """Decode and verify a container; inverse of pack."""
    data = _file_bytes(data)
    chunk_size, directory, entries = _parse_structure(data)

    total = sum(e.uncomp_len for e in entries)
    out = np.empty(total, dtype=np.uint8)
    jobs = []
    labels = []
    pos = 0
    for i, e in enumerate(entries):
        raw = data[e.file_offset : e.file_offset + e.comp_len]
        dest = out[pos : pos + e.uncomp_len]
        if e.codec == CODEC_STORE:
            dest[:] = np.frombuffer(raw, dtype=np.uint8)
        else:
            jobs.append((raw, dest))
            labels.append(i)
        pos += e.uncomp_len

    if jobs:
        workers = min(thread_count(), math.ceil(len(jobs) / 4))
        if workers > 1:
            # contiguous slices in multiples of 4 keep the quad kernel fed
            per = math.ceil(len(jobs) / workers / 4) * 4
            slices = [(jobs[i : i + per], labels[i : i + per]) for i in range(0, len(jobs), per)]
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda s: ans.decode_blobs_into(s[0], s[1]), slices))
        else:
            ans.decode_blobs_into(jobs, labels)

    pos = 0
    for i, e in enumerate(entries):
        if zlib.crc32(out[pos : pos + e.uncomp_len]) != e.crc32:
            raise ChecksumError(i)
        pos += e.uncomp_len

    tensors = []
    stats = {}
    pos = 0
    for name, rows, cols, w_scale, alpha, s, cm in directory:
        n = rows * cols
        q = out[pos : pos + n].view(np.int8).reshape(rows, cols).copy()
        pos += n
        tensors.append(QuantizedTensor(name, q, w_scale, ScaleVector(alpha, s)))
        stats[name] = ActivationStats(name, cm)
    return ModelBundle(tensors=tensors, stats=stats, chunk_size=chunk_size)


def read_container(path) -> ModelBundle:
    return unpack(path)


def chunked_compress(data, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[bytes]:
    """Split raw bytes into chunk-sized ANS blobs (benchmark helper)."""
    u8 = np.frombuffer(data, dtype=np.uint8) if not isinstance(data, np.ndarray) else data
    return [ans.compress_blob(u8[i : i + chunk_size]) for i in range(0, u8.size, chunk_size)]


def chunked_decompress(blobs: list[bytes], lengths: list[int]) -> np.ndarray:
    out = np.empty(sum(lengths), dtype=np.uint8)
    jobs = []
    pos = 0
    for blob, n in zip(blobs, lengths):
        jobs.append((blob, out[pos : pos + n]))
        pos += n
    ans.decode_blobs_into(jobs)
    return out
