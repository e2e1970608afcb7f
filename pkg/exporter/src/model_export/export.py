"""Extract linear-layer weights and calibration activation maxima.

A torch module contributes one matrix per ``nn.Linear`` (rows = output
channels, cols = input channels, exactly the layout ``weight`` already
has); a plain name->tensor mapping contributes every ``*.weight`` entry,
skipping non-2-D tensors with a manifest record.  Activation maxima come
from forward pre-hooks: for each linear, the element-wise max of
|input| over every calibration token, one value per input channel.
"""

from __future__ import annotations

import dataclasses
import json
import warnings

import numpy as np
import torch
from torch import nn

from . import dcwt_io


@dataclasses.dataclass
class ExportManifest:
    model: str
    tensors: list[dict]  # {"name", "rows", "cols"}
    skipped: list[dict]  # {"name", "shape", "reason"}
    calibration_samples: int = 0
    dataset: str = ""

    @property
    def names(self) -> list[str]:
        return [t["name"] for t in self.tensors]

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExportManifest":
        return cls(**json.loads(text))


def _weight_matrices(checkpoint) -> tuple[list, list]:
    pairs, skipped = [], []
    if isinstance(checkpoint, nn.Module):
        for name, mod in checkpoint.named_modules():
            if isinstance(mod, nn.Linear):
                pairs.append((name, mod.weight.detach().cpu().numpy()))
        return pairs, skipped
    for name, t in checkpoint.items():
        if not (name == "weight" or name.endswith(".weight")):
            continue  # biases, norms etc. are not weight matrices
        arr = t.detach().cpu().numpy() if isinstance(t, torch.Tensor) else np.asarray(t)
        if arr.ndim != 2:
            warnings.warn(f"skipping {name}: rank {arr.ndim} is not a weight matrix", stacklevel=2)
            skipped.append({"name": name, "shape": list(arr.shape), "reason": f"rank {arr.ndim} != 2"})
            continue
        pairs.append((name, arr))
    return pairs, skipped


def export_weights(checkpoint, out_path, model_id: str = "") -> ExportManifest:
    """Write every exportable weight matrix to a float32 DCWT file.

    ``checkpoint`` is a torch module (linears only) or a name->tensor
    mapping (every 2-D ``*.weight`` entry).
    """
    pairs, skipped = _weight_matrices(checkpoint)
    if not pairs:
        raise ValueError("checkpoint contains no 2-D weight matrices")
    dcwt_io.write_weights(out_path, pairs)
    tensors = [{"name": n, "rows": int(v.shape[0]), "cols": int(v.shape[1])} for n, v in pairs]
    return ExportManifest(model=model_id, tensors=tensors, skipped=skipped)


def collect_activation_stats(model: nn.Module, calibration, out_path=None) -> dict[str, np.ndarray]:
    """Per-input-channel max |activation| entering each linear layer.

    ``calibration`` yields one sample per entry: a tensor, a tuple of
    positional args, or a dict of keyword args for ``model``.  Maxima
    accumulate with element-wise max, so sample order is irrelevant.
    """
    maxima: dict[str, torch.Tensor] = {}
    hooks = []

    def make_hook(name):
        def hook(_mod, inputs):
            x = inputs[0].detach().to(torch.float64)
            m = x.abs().reshape(-1, x.shape[-1]).amax(0)
            cur = maxima.get(name)
            maxima[name] = m if cur is None else torch.maximum(cur, m)

        return hook

    for name, mod in model.named_modules():
        if isinstance(mod, nn.Linear):
            hooks.append(mod.register_forward_pre_hook(make_hook(name)))
    if not hooks:
        raise ValueError("model contains no linear layers")

    model.eval()
    n = 0
    try:
        with torch.no_grad():
            for sample in calibration:
                if isinstance(sample, dict):
                    model(**sample)
                elif isinstance(sample, (tuple, list)):
                    model(*sample)
                else:
                    model(sample)
                n += 1
    finally:
        for h in hooks:
            h.remove()
    if n == 0:
        raise ValueError("need at least one calibration sample")

    stats = {name: t.cpu().numpy() for name, t in maxima.items()}
    if out_path is not None:
        dcwt_io.write_stats(out_path, stats)
    return stats


def check_coverage(weight_names, stats) -> None:
    """Every exported tensor must appear in the stats and vice versa."""
    missing = sorted(set(weight_names) - set(stats))
    extra = sorted(set(stats) - set(weight_names))
    if missing or extra:
        raise ValueError(
            f"weights/stats name mismatch: missing stats for {missing}, stats without weights {extra}"
        )
