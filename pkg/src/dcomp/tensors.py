"""Core domain types and distribution analytics.

Weights are 2-D float64 matrices (rows = output channels, cols = input
channels); activation statistics carry one non-negative per-input-channel
maximum.  The analytics here (near-zero fraction, byte entropy, IQR
outliers) quantify how entropy-coder-friendly a tensor is.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DcompError

# Near-zero bands.  For floats there is no canonical band, so a fixed
# absolute epsilon is used; for int8 the band is |v| <= 1, the smallest
# band that makes "near zero" distinct from "exactly zero".
EPS_FP = 1e-2
TAU_NZ = 1


@dataclasses.dataclass(frozen=True)
class WeightTensor:
    name: str
    values: np.ndarray  # (rows, cols) float64

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"{self.name}: expected 2-D values, got {v.ndim}-D")
        if v.size and not np.all(np.isfinite(v)):
            raise ValueError(f"{self.name}: non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclasses.dataclass(frozen=True)
class ActivationStats:
    name: str
    channel_max: np.ndarray  # (cols,) float64, >= 0

    def __post_init__(self):
        cm = np.asarray(self.channel_max, dtype=np.float64)
        if cm.ndim != 1:
            raise ValueError(f"{self.name}: channel_max must be 1-D")
        if np.any(cm < 0) or not np.all(np.isfinite(cm)):
            raise ValueError(f"{self.name}: channel_max must be finite and >= 0")
        object.__setattr__(self, "channel_max", cm)


@dataclasses.dataclass(frozen=True)
class DistributionReport:
    near_zero_fraction: float
    byte_entropy: float  # bits per symbol, [0, 8]
    outlier_count: int
    min: float
    max: float
    mean: float
    stddev: float


def _entropy_bits(hist: np.ndarray) -> float:
    n = hist.sum()
    if n == 0:
        return 0.0
    p = hist[hist > 0] / n
    return float(-np.sum(p * np.log2(p)))


def _iqr_outliers(absv: np.ndarray) -> int:
    q1, q3 = np.percentile(absv, [25, 75])
    return int(np.sum(absv > q3 + 1.5 * (q3 - q1)))


def analyze_float(t: WeightTensor) -> DistributionReport:
    """Distribution report for a float tensor.

    byte_entropy is the Shannon entropy of a 256-bin histogram over
    [min, max] — a proxy for how the values would code as bytes, not an
    actual quantization.  A constant tensor has entropy 0 by convention.
    """
    v = t.values.ravel()
    if v.size == 0:
        raise DcompError("empty input")
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        hist, _ = np.histogram(v, bins=256, range=(lo, hi))
    else:
        hist = np.array([v.size])
    return DistributionReport(
        near_zero_fraction=float(np.mean(np.abs(v) < EPS_FP)),
        byte_entropy=_entropy_bits(hist),
        outlier_count=_iqr_outliers(np.abs(v)),
        min=lo,
        max=hi,
        mean=float(v.mean()),
        stddev=float(v.std()),
    )


def analyze_quantized(q) -> DistributionReport:
    """Distribution report for int8 data (QuantizedTensor or int8 array)."""
    v = np.asarray(getattr(q, "qvalues", q), dtype=np.int8).ravel()
    if v.size == 0:
        raise DcompError("empty input")
    hist = np.bincount(v.view(np.uint8), minlength=256)
    return DistributionReport(
        near_zero_fraction=float(np.mean(np.abs(v.astype(np.int16)) <= TAU_NZ)),
        byte_entropy=_entropy_bits(hist),
        outlier_count=_iqr_outliers(np.abs(v.astype(np.int16))),
        min=float(v.min()),
        max=float(v.max()),
        mean=float(v.mean()),
        stddev=float(v.std()),
    )


def compression_ratio(original_bytes: int, compressed_bytes: int) -> float:
    if compressed_bytes <= 0:
        raise DcompError("compressed size must be positive")
    return original_bytes / compressed_bytes


@dataclasses.dataclass(frozen=True)
class SynthSpec:
    """Generator parameters for one synthetic weight/stats pair.

    Weights: zero-mean Gaussian clipped to +-weight_clip.  Channel maxima:
    log-normal, with a fraction of channels multiplied by outlier_scale to
    mimic the heavy activation outliers real transformer layers show.
    """

    rows: int = 512
    cols: int = 512
    weight_std: float = 0.2
    weight_clip: float = 1.0
    act_mu: float = -1.0
    act_sigma: float = 1.0
    outlier_fraction: float = 0.02
    outlier_scale: float = 20.0
    name: str = "synth"


def synth_ensemble(spec: SynthSpec, seed: int) -> tuple[WeightTensor, ActivationStats]:
    """Deterministic synthetic (weights, stats) pair for a spec and seed."""
    if spec.rows <= 0 or spec.cols <= 0:
        raise DcompError(f"non-positive dims {spec.rows}x{spec.cols}")
    rng = np.random.default_rng(seed)
    w = np.clip(
        rng.normal(0.0, spec.weight_std, (spec.rows, spec.cols)),
        -spec.weight_clip,
        spec.weight_clip,
    )
    cm = rng.lognormal(spec.act_mu, spec.act_sigma, spec.cols)
    k = int(round(spec.outlier_fraction * spec.cols))
    if k:
        idx = rng.choice(spec.cols, k, replace=False)
        cm[idx] *= spec.outlier_scale
    return WeightTensor(spec.name, w), ActivationStats(spec.name, cm)


# Default test ensemble: one transformer-style block.  The V and FFN-down
# projections see outlier-heavy activations (wide log-normal plus injected
# outlier channels); the remaining projections see a milder spread, the
# regime where pruning still has non-zero weights left to remove.
DEFAULT_LAYERS = (
    ("attn_q", 512, 512, 0.5, 0.0),
    ("attn_k", 512, 512, 0.5, 0.0),
    ("attn_v", 512, 512, 1.0, 0.02),
    ("attn_o", 512, 512, 0.5, 0.0),
    ("ffn_up", 1024, 512, 0.5, 0.0),
    ("ffn_down", 512, 1024, 1.0, 0.02),
)

DEFAULT_SEED = 0


def default_ensemble(seed: int = DEFAULT_SEED) -> list[tuple[WeightTensor, ActivationStats]]:
    """The seeded six-layer ensemble used by sweeps, benchmarks and tests."""
    out = []
    for i, (name, rows, cols, act_sigma, outlier_fraction) in enumerate(DEFAULT_LAYERS):
        spec = SynthSpec(
            rows=rows,
            cols=cols,
            act_sigma=act_sigma,
            outlier_fraction=outlier_fraction,
            name=name,
        )
        out.append(synth_ensemble(spec, seed + i))
    return out
