"""Compression-aware per-channel scaling and symmetric INT8 quantization.

Scaling multiplies weight column c by s_c = channel_max[c]**alpha before
quantization, and the matching activation column is divided by s_c at run
time, so X @ W is algebraically unchanged while the weight histogram
narrows for most channels — which is what makes the entropy coder win.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DcompError
from .tensors import ActivationStats, WeightTensor

# Floor for channels whose calibration activation max is zero: their scale
# is immaterial (the channel contributes nothing) but must stay positive
# so the runtime division X / s is finite.
EPS_SCALE = 1e-8

ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


@dataclasses.dataclass(frozen=True)
class ScaleVector:
    alpha: float
    s: np.ndarray  # (cols,) float64, > 0

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("scale factors must be positive and finite")
        object.__setattr__(self, "s", s)

    @classmethod
    def identity(cls, cols: int) -> "ScaleVector":
        return cls(0.0, np.ones(cols))


@dataclasses.dataclass(frozen=True)
class QuantizedTensor:
    name: str
    qvalues: np.ndarray  # (rows, cols) int8 in [-127, 127]
    w_scale: float
    scale_vec: ScaleVector

    def __post_init__(self):
        q = np.asarray(self.qvalues, dtype=np.int8)
        if q.ndim != 2:
            raise ValueError(f"{self.name}: expected 2-D qvalues")
        object.__setattr__(self, "qvalues", q)
        if self.w_scale <= 0:
            raise ValueError(f"{self.name}: w_scale must be positive")
        if len(self.scale_vec.s) != q.shape[1]:
            raise ValueError(f"{self.name}: scale_vec length != cols")

    @property
    def rows(self) -> int:
        return self.qvalues.shape[0]

    @property
    def cols(self) -> int:
        return self.qvalues.shape[1]


def compute_scale(stats: ActivationStats, alpha: float) -> ScaleVector:
    """s_i = channel_max[i]**alpha, floored at EPS_SCALE; alpha=0 is identity."""
    if not 0.0 <= alpha <= 1.0:
        raise DcompError(f"alpha must be in [0, 1], got {alpha}")
    if alpha == 0.0:
        return ScaleVector.identity(len(stats.channel_max))
    s = np.maximum(stats.channel_max, EPS_SCALE) ** alpha
    return ScaleVector(alpha, s)


def scale_weights(w: WeightTensor, sv: ScaleVector) -> WeightTensor:
    if len(sv.s) != w.cols:
        raise DcompError(f"{w.name}: scale length {len(sv.s)} != cols {w.cols}")
    return WeightTensor(w.name, w.values * sv.s[None, :])


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # np.round is half-to-even; the format pins half-away-from-zero.
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(w: WeightTensor, scale_vec: ScaleVector | None = None) -> QuantizedTensor:
    """Per-tensor symmetric INT8: q = clamp(round(v / w_scale), -127, 127).

    w_scale = max|v| / 127, so the extreme element maps to +-127 exactly.
    scale_vec records the per-channel scaling already applied to w (identity
    when quantizing unscaled weights) so dequantize can undo it.
    """
    v = w.values
    if v.size == 0:
        raise DcompError(f"{w.name}: empty input")
    m = float(np.abs(v).max())
    if m == 0.0:
        raise DcompError(f"{w.name}: zero dynamic range")
    w_scale = m / 127.0
    q = np.clip(_round_half_away(v / w_scale), -127, 127).astype(np.int8)
    sv = scale_vec if scale_vec is not None else ScaleVector.identity(w.cols)
    return QuantizedTensor(w.name, q, w_scale, sv)


def quantize_scaled(w: WeightTensor, stats: ActivationStats, alpha: float) -> QuantizedTensor:
    """compute_scale + scale_weights + quantize in one step."""
    sv = compute_scale(stats, alpha)
    return quantize(scale_weights(w, sv), sv)


def dequantize(q: QuantizedTensor) -> WeightTensor:
    """v = q * w_scale, then divide out the stored per-channel scaling."""
    v = q.qvalues.astype(np.float64) * q.w_scale / q.scale_vec.s[None, :]
    return WeightTensor(q.name, v)


@dataclasses.dataclass(frozen=True)
class LayerErrorReport:
    alpha: float
    fp_identity_error: float  # (X/s)(sW) vs XW, no quantization
    quantized_error: float  # full INT8 path vs FP reference


def simulate_layer(x: np.ndarray, w: WeightTensor, stats: ActivationStats, alpha: float) -> LayerErrorReport:
    """End-to-end numeric error of the scaled INT8 path on a layer.

    Computes Y = X @ W.T in float64, then the scaled/quantized path:
    X' = X/s, W' = sW, both quantized per-tensor symmetric, dequantized,
    multiplied.  Reports relative Frobenius errors against Y.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != w.cols:
        raise DcompError(f"{w.name}: activation shape {x.shape} incompatible with cols {w.cols}")
    sv = compute_scale(stats, alpha)
    y_ref = x @ w.values.T
    ref_norm = float(np.linalg.norm(y_ref))
    if ref_norm == 0.0:
        raise DcompError(f"{w.name}: reference output is identically zero")

    xs = x / sv.s[None, :]
    ws = scale_weights(w, sv)
    fp_err = float(np.linalg.norm(xs @ ws.values.T - y_ref)) / ref_norm

    qw = quantize(ws, sv)
    qx = quantize(WeightTensor(f"{w.name}.x", xs))
    x_hat = qx.qvalues.astype(np.float64) * qx.w_scale
    w_hat = qw.qvalues.astype(np.float64) * qw.w_scale
    q_err = float(np.linalg.norm(x_hat @ w_hat.T - y_ref)) / ref_norm
    return LayerErrorReport(alpha=alpha, fp_identity_error=fp_err, quantized_error=q_err)
