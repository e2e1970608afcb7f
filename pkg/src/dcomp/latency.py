"""Pipelined loading/decompression/compute latency model and planner.

Weights stream through up to three stages per chunk: loading over the
slowest link of the chosen memory path, decompression on the GPU, and the
weight computation itself.  Stages are perfectly pipelined, so one chunk
costs the max of its three stage times; per-sample latency sums that over
chunks.  Decompression speed grows linearly with chunk size until it
saturates (d = D_max * min(1, chunk_size / c_sat)).

The planner trades decompression time against memory: with block size N
only the last chunk of every N-chunk block is compressed, cutting the
decompression stage to 1/N while shrinking the compressed fraction to
1/N.  It picks the smallest N (largest fraction, smallest footprint)
whose latency fits the budget, falling back to storing everything.

Rates are GB/s with GB = 1e9 bytes; sizes are bytes; times are seconds.
"""

from __future__ import annotations

import dataclasses
import enum
import json

import numpy as np
from scipy.optimize import least_squares

from .errors import DcompError

GB = 1e9


class Architecture(enum.Enum):
    GPU_ONLY = "gpu_only"  # whole model resident in GPU memory, no buffer
    GPU_BUFFER = "gpu_buffer"  # compressed model + decompression buffer in GPU
    GPU_CPU = "gpu_cpu"  # overflow held in CPU memory, streamed over PCIe
    STORAGE = "storage"  # streamed from disk through CPU to GPU


class Bottleneck(enum.Enum):
    LOADING = "loading"
    DECOMPRESSION = "decompression"
    COMPUTE = "compute"


@dataclasses.dataclass(frozen=True)
class HardwareProfile:
    B_stoc: float  # storage -> CPU bandwidth, GB/s
    B_ctog: float  # CPU -> GPU bandwidth, GB/s
    B_gpu: float  # GPU memory bandwidth, GB/s
    D_max: float  # peak decompression speed, GB/s
    c_sat: float  # chunk size (bytes) where decompression saturates
    I_gpu: float  # weight-compute throughput, GB/s
    mem_gpu: float  # bytes
    mem_cpu: float  # bytes

    def __post_init__(self):
        for field in ("B_stoc", "B_ctog", "B_gpu", "D_max", "c_sat", "I_gpu"):
            if getattr(self, field) <= 0:
                raise DcompError(f"{field} must be positive")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HardwareProfile":
        doc = json.loads(text)
        fields = {f.name for f in dataclasses.fields(cls)}
        missing = fields - doc.keys()
        if missing:
            raise DcompError(f"profile missing fields: {sorted(missing)}")
        return cls(**{k: doc[k] for k in fields})


# Illustrative datacenter-GPU profile.  D_max and c_sat come from fitting
# the saturating-linear curve to published chunk-size/decompression-rate
# measurements (48.05 MB -> 97.76 GB/s, 300.16 MB -> 156.08 GB/s).
REFERENCE_PROFILE = HardwareProfile(
    B_stoc=3.0,
    B_ctog=25.0,
    B_gpu=600.0,
    D_max=156.08,
    c_sat=76.72e6,
    I_gpu=200.0,
    mem_gpu=45e9,
    mem_cpu=64e9,
)


@dataclasses.dataclass(frozen=True)
class CompressionPlan:
    chunk_size: int
    n_chunks: int
    block_size: int  # chunks per block; 0 = nothing compressed
    compressed_mask: np.ndarray  # (n_chunks,) bool

    def __post_init__(self):
        mask = np.asarray(self.compressed_mask, dtype=bool)
        if mask.shape != (self.n_chunks,):
            raise DcompError(f"mask length {mask.size} != n_chunks {self.n_chunks}")
        object.__setattr__(self, "compressed_mask", mask)

    @classmethod
    def block_plan(cls, chunk_size: int, n_chunks: int, block_size: int) -> "CompressionPlan":
        """Mark the last chunk of every complete block of `block_size` chunks."""
        if block_size < 0 or block_size > n_chunks:
            raise DcompError(f"block_size must be in [0, {n_chunks}], got {block_size}")
        mask = np.zeros(n_chunks, dtype=bool)
        if block_size > 0:
            mask[block_size - 1 :: block_size] = True
            # an incomplete trailing block contributes no compressed chunk
            mask[(n_chunks // block_size) * block_size :] = False
        return cls(chunk_size, n_chunks, block_size, mask)

    @property
    def compressed_fraction(self) -> float:
        return float(np.mean(self.compressed_mask)) if self.n_chunks else 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "chunk_size": self.chunk_size,
                "n_chunks": self.n_chunks,
                "block_size": self.block_size,
                "compressed_mask": self.compressed_mask.astype(int).tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "CompressionPlan":
        doc = json.loads(text)
        try:
            return cls(
                int(doc["chunk_size"]),
                int(doc["n_chunks"]),
                int(doc["block_size"]),
                np.asarray(doc["compressed_mask"], dtype=bool),
            )
        except KeyError as e:
            raise DcompError(f"plan missing field {e}") from None


@dataclasses.dataclass(frozen=True)
class LatencyReport:
    architecture: Architecture
    per_sample_latency: float
    bottleneck: Bottleneck
    memory_used_gpu: float
    memory_used_cpu: float
    stage_seconds: dict[str, float]  # totals per stage, for inspection

    def to_json(self) -> str:
        doc = dataclasses.asdict(self)
        doc["architecture"] = self.architecture.value
        doc["bottleneck"] = self.bottleneck.value
        return json.dumps(doc, indent=2)


def effective_loading(h: HardwareProfile, arch: Architecture) -> float:
    """Loading bandwidth: the slowest link on the path the weights travel."""
    if arch in (Architecture.GPU_ONLY, Architecture.GPU_BUFFER):
        return h.B_gpu
    if arch is Architecture.GPU_CPU:
        return min(h.B_ctog, h.B_gpu)
    return min(h.B_stoc, h.B_ctog, h.B_gpu)


def d_gpu(h: HardwareProfile, chunk_size: int) -> float:
    """Saturating-linear decompression speed for a chunk size."""
    if chunk_size <= 0:
        raise DcompError(f"chunk_size must be positive, got {chunk_size}")
    return h.D_max * min(1.0, chunk_size / h.c_sat)


def _cr_vector(plan: CompressionPlan, cr_per_chunk) -> np.ndarray:
    cr = np.broadcast_to(np.asarray(cr_per_chunk, dtype=np.float64), (plan.n_chunks,))
    if np.any(cr < 1.0):
        raise DcompError("compression ratios must be >= 1")
    return cr


def latency(h: HardwareProfile, plan: CompressionPlan, arch: Architecture, cr_per_chunk=1.0) -> LatencyReport:
    """Per-sample latency of streaming every chunk once.

    Compressed chunks travel compressed (loaded bytes = S/cr) and pay the
    decompression stage; stored chunks travel raw and skip it.  With a
    uniform plan this reduces to max(S/B, S/D, S/I) * n_chunks.
    """
    cr = _cr_vector(plan, cr_per_chunk)
    S = float(plan.chunk_size)
    B = effective_loading(h, arch) * GB
    D = d_gpu(h, plan.chunk_size) * GB
    I = h.I_gpu * GB
    mask = plan.compressed_mask

    load_t = np.where(mask, S / cr, S) / B
    dec_t = np.where(mask, S / D, 0.0)
    comp_t = np.full(plan.n_chunks, S / I)
    total = float(np.sum(np.maximum(np.maximum(load_t, dec_t), comp_t)))

    stages = {
        "loading": float(load_t.sum()),
        "decompression": float(dec_t.sum()),
        "compute": float(comp_t.sum()),
    }
    bottleneck = max(Bottleneck, key=lambda b: stages[b.value])

    footprint = memory_footprint(plan, cr)
    if arch in (Architecture.GPU_ONLY, Architecture.GPU_BUFFER):
        used_gpu, used_cpu = footprint, 0.0
    else:
        used_gpu = min(footprint, h.mem_gpu)
        used_cpu = min(max(footprint - h.mem_gpu, 0.0), h.mem_cpu)
    return LatencyReport(
        architecture=arch,
        per_sample_latency=total,
        bottleneck=bottleneck,
        memory_used_gpu=used_gpu,
        memory_used_cpu=used_cpu,
        stage_seconds=stages,
    )


def memory_footprint(plan: CompressionPlan, cr_per_chunk=1.0, buffer_chunks: int = 1) -> float:
    """Resident bytes: compressed chunks at S/cr, stored at S, plus the
    decompression staging buffer (one chunk by default)."""
    cr = _cr_vector(plan, cr_per_chunk)
    S = float(plan.chunk_size)
    sizes = np.where(plan.compressed_mask, S / cr, S)
    return float(sizes.sum() + buffer_chunks * S)


def choose_architecture(h: HardwareProfile, model_bytes_compressed: float, buffer_bytes: float) -> Architecture:
    """Fastest memory tier that fits the compressed model plus buffer."""
    need = model_bytes_compressed + buffer_bytes
    if need <= h.mem_gpu:
        return Architecture.GPU_BUFFER
    if need <= h.mem_gpu + h.mem_cpu:
        return Architecture.GPU_CPU
    return Architecture.STORAGE


@dataclasses.dataclass(frozen=True)
class PlanResult:
    plan: CompressionPlan
    feasible: bool
    report: LatencyReport


def plan_partial(
    h: HardwareProfile,
    n_chunks: int,
    chunk_size: int,
    cr_estimate: float,
    latency_budget: float,
    arch: Architecture = Architecture.GPU_BUFFER,
) -> PlanResult:
    """Smallest-footprint block plan whose latency meets the budget.

    Block sizes are searched ascending (N=1 compresses everything), so the
    first hit maximizes the compressed fraction.  If no block plan fits,
    the all-store plan is returned, flagged infeasible when even that
    misses the budget.
    """
    if latency_budget <= 0:
        raise DcompError(f"latency budget must be positive, got {latency_budget}")
    for block_size in range(1, n_chunks + 1):
        plan = CompressionPlan.block_plan(chunk_size, n_chunks, block_size)
        cr = np.where(plan.compressed_mask, cr_estimate, 1.0)
        report = latency(h, plan, arch, cr)
        if report.per_sample_latency <= latency_budget:
            return PlanResult(plan, True, report)
    plan = CompressionPlan.block_plan(chunk_size, n_chunks, 0)
    report = latency(h, plan, arch, 1.0)
    return PlanResult(plan, report.per_sample_latency <= latency_budget, report)


def fit_speed_curve(points) -> tuple[float, float]:
    """Least-squares fit of (chunk_size, speed) pairs to the saturating-
    linear model; returns (D_max, c_sat)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise DcompError("need at least two (chunk_size, speed) points")
    c, d = pts[:, 0], pts[:, 1]

    def residuals(x):
        return x[0] * np.minimum(1.0, c / x[1]) - d

    x0 = np.array([d.max(), np.median(c)])
    sol = least_squares(residuals, x0, bounds=([1e-9, 1e-9], [np.inf, np.inf]))
    return float(sol.x[0]), float(sol.x[1])
