"""model-export: dump a checkpoint to the DCWT weights + stats pair.

    model-export --model <hf-id-or-path> --calib texts.txt \
        --out-weights w.dcwt --out-stats s.json --manifest m.json

The calibration file holds one text sample per line.  Exit codes:
0 success, 1 failure, 2 usage.
"""

from __future__ import annotations

import argparse
import sys


def _run(args) -> None:
    import torch
    from transformers import AutoModel, AutoTokenizer

    from .export import check_coverage, collect_activation_stats, export_weights

    with open(args.calib, encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    lines = lines[: args.max_samples]
    if not lines:
        raise ValueError(f"{args.calib}: no calibration samples")

    model = AutoModel.from_pretrained(args.model)
    model.eval()
    tokenizer = AutoTokenizer.from_pretrained(args.model)

    manifest = export_weights(model, args.out_weights, model_id=args.model)

    def samples():
        for text in lines:
            enc = tokenizer(text, return_tensors="pt", truncation=True, max_length=args.max_tokens)
            yield {k: v for k, v in enc.items() if k in ("input_ids", "attention_mask")}

    with torch.no_grad():
        stats = collect_activation_stats(model, samples(), out_path=args.out_stats)
    check_coverage(manifest.names, stats)

    manifest.calibration_samples = len(lines)
    manifest.dataset = args.dataset or args.calib
    with open(args.manifest, "w", encoding="utf-8") as f:
        f.write(manifest.to_json())
    total = sum(t["rows"] * t["cols"] for t in manifest.tensors)
    print(f"exported {len(manifest.tensors)} tensors ({total} values) from {args.model}")
    print(f"calibrated on {len(lines)} samples -> {args.out_stats}")
    if manifest.skipped:
        print(f"skipped {len(manifest.skipped)} tensors (see manifest)")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="model-export", description=__doc__)
    p.add_argument("--model", required=True, help="HF model id or local checkpoint directory")
    p.add_argument("--calib", required=True, help="text file, one calibration sample per line")
    p.add_argument("--out-weights", required=True)
    p.add_argument("--out-stats", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--max-samples", type=int, default=128)
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--dataset", default="", help="dataset identifier recorded in the manifest")
    args = p.parse_args(argv)
    try:
        _run(args)
        return 0
    except Exception as e:  # noqa: BLE001 - batch script: report and exit nonzero
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
