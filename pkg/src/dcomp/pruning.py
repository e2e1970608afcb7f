"""Activation-aware pruning of quantized weights.

Score of entry (r, c) is channel_max[c] * |q[r, c]|: a weight matters if
it is large *and* sees large activations.  The lowest-scoring fraction is
zeroed exactly (k-th order statistic, not a numeric threshold), which
raises the zero count the entropy coder exploits.  No index matrix is
kept — the zeros themselves compress.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .errors import DcompError
from .scaling import QuantizedTensor
from .tensors import ActivationStats


class PruneScope(enum.Enum):
    PER_TENSOR = "per_tensor"
    PER_ROW = "per_row"


@dataclasses.dataclass(frozen=True)
class PruneConfig:
    sparsity: float
    scope: PruneScope = PruneScope.PER_TENSOR

    def __post_init__(self):
        if not 0.0 <= self.sparsity <= 1.0:
            raise DcompError(f"sparsity must be in [0, 1], got {self.sparsity}")


def prune_scores(q: QuantizedTensor, stats: ActivationStats) -> np.ndarray:
    if len(stats.channel_max) != q.cols:
        raise DcompError(f"{q.name}: stats length {len(stats.channel_max)} != cols {q.cols}")
    return stats.channel_max[None, :] * np.abs(q.qvalues.astype(np.float64))


def _lowest_k(scores: np.ndarray, k: int) -> np.ndarray:
    # stable sort == lexicographic (r, c) tie-break on the flat row-major index
    return np.argsort(scores, axis=None, kind="stable")[:k]


def prune(q: QuantizedTensor, stats: ActivationStats, cfg: PruneConfig) -> QuantizedTensor:
    """Zero exactly floor(sparsity * n) lowest-scoring entries per scope.

    Entries not selected are bit-identical to the input; w_scale and
    scale_vec are unchanged.  Already-zero entries score 0 and are selected
    first, so the operation is idempotent.
    """
    scores = prune_scores(q, stats)
    out = q.qvalues.copy()
    if cfg.scope is PruneScope.PER_TENSOR:
        k = int(np.floor(cfg.sparsity * out.size))
        out.ravel()[_lowest_k(scores, k)] = 0
    else:
        k = int(np.floor(cfg.sparsity * q.cols))
        for r in range(q.rows):
            out[r, _lowest_k(scores[r], k)] = 0
    return QuantizedTensor(q.name, out, q.w_scale, q.scale_vec)
