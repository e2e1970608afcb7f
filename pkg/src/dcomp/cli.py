"""Command-line entry point: `dcomp <command>`.

Pipeline commands (synth, quantize, prune, pack, unpack) move DCWT and
DCC1 files; reporting commands (analyze, sweep, bench, simulate) print
text or JSON.  Exit codes: 0 success, 2 usage, 3 data/format error,
4 internal error.  DCOMP_THREADS caps per-chunk parallelism.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import ans, bench, container, dcwt
from .errors import DataFormatError, DcompError, InternalError
from .latency import (
    Architecture,
    CompressionPlan,
    HardwareProfile,
    REFERENCE_PROFILE,
    choose_architecture,
    latency,
    memory_footprint,
    plan_partial,
)
from .pruning import PruneConfig, PruneScope, prune
from .scaling import ALPHA_GRID, quantize_scaled, simulate_layer
from .tensors import (
    DEFAULT_SEED,
    SynthSpec,
    analyze_float,
    analyze_quantized,
    compression_ratio,
    default_ensemble,
    synth_ensemble,
)


def _cmd_synth(args) -> int:
    if args.preset == "default":
        pairs = default_ensemble(args.seed)
    else:
        spec = SynthSpec(rows=args.rows, cols=args.cols, name=args.name)
        pairs = [synth_ensemble(spec, args.seed)]
    dcwt.write_weights(args.out_weights, [w for w, _ in pairs])
    dcwt.write_stats(args.out_stats, [s for _, s in pairs])
    for w, _ in pairs:
        print(f"{w.name}: {w.rows}x{w.cols}")
    print(f"wrote {len(pairs)} tensors to {args.out_weights}, stats to {args.out_stats}")
    return 0


def _load_inputs(args):
    weights = dcwt.read_weights(args.weights)
    stats = dcwt.read_stats(args.stats)
    for w in weights:
        if w.name not in stats:
            raise DataFormatError(f"missing activation stats for tensor {w.name!r}")
    return weights, stats


def _cmd_quantize(args) -> int:
    weights, stats = _load_inputs(args)
    tensors = [quantize_scaled(w, stats[w.name], args.alpha) for w in weights]
    plan = CompressionPlan.block_plan(args.chunk_size, _n_chunks(tensors, args.chunk_size), 0)
    container.write_container(args.out, tensors, stats, chunk_size=args.chunk_size, plan=plan)
    print(f"quantized {len(tensors)} tensors at alpha={args.alpha} -> {args.out}")
    return 0


def _n_chunks(tensors, chunk_size: int) -> int:
    total = sum(t.qvalues.size for t in tensors)
    return -(-total // chunk_size)


def _cmd_prune(args) -> int:
    bundle = container.unpack(args.infile)
    cfg = PruneConfig(args.sparsity, PruneScope(args.scope))
    pruned = [prune(t, bundle.stats[t.name], cfg) for t in bundle.tensors]
    plan = CompressionPlan.block_plan(bundle.chunk_size, _n_chunks(pruned, bundle.chunk_size), 0)
    container.write_container(args.out, pruned, bundle.stats, chunk_size=bundle.chunk_size, plan=plan)
    print(f"pruned at sparsity={args.sparsity} scope={args.scope} -> {args.out}")
    return 0


def _cmd_pack(args) -> int:
    bundle = container.unpack(args.infile)
    chunk_size = args.chunk_size or bundle.chunk_size
    n = _n_chunks(bundle.tensors, chunk_size)
    if args.codec == "store":
        block_size = 0
    elif args.codec == "ans":
        block_size = 1
    else:
        block_size = args.block_size if args.block_size is not None else 1
    plan = CompressionPlan.block_plan(chunk_size, n, block_size)
    blob = container.pack(bundle.tensors, bundle.stats, chunk_size=chunk_size, plan=plan)
    with open(args.out, "wb") as f:
        f.write(blob)
    total = sum(t.qvalues.size for t in bundle.tensors)
    print(f"packed {n} chunks (block_size={block_size}) -> {args.out}")
    print(f"payload {total} bytes, file {len(blob)} bytes, CR {compression_ratio(total, len(blob)):.4f}")
    return 0


def _cmd_unpack(args) -> int:
    bundle = container.unpack(args.infile)
    plan = CompressionPlan.block_plan(bundle.chunk_size, _n_chunks(bundle.tensors, bundle.chunk_size), 0)
    container.write_container(args.out, bundle.tensors, bundle.stats, chunk_size=bundle.chunk_size, plan=plan)
    print(f"verified and unpacked {len(bundle.tensors)} tensors -> {args.out}")
    return 0


def _blob_len(data: np.ndarray) -> int:
    return len(ans.compress_blob(data))


def _analyze_report(path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(4)
    layers = []
    if magic == container.MAGIC:
        bundle = container.unpack(path)
        info = container.inspect(path)
        fmt = "dcc1"
        extra = {"file_size": info.file_size, "container_cr": compression_ratio(info.total_uncompressed, info.file_size) if info.total_uncompressed else 1.0}
        for t in bundle.tensors:
            rep = analyze_quantized(t)
            u8 = t.qvalues.reshape(-1).view(np.uint8)
            layers.append(
                {
                    "name": t.name,
                    "rows": t.rows,
                    "cols": t.cols,
                    "near_zero_fraction": rep.near_zero_fraction,
                    "byte_entropy": rep.byte_entropy,
                    "uncompressed_bytes": int(u8.size),
                    "ans_bytes": _blob_len(u8),
                }
            )
    elif magic == dcwt.MAGIC:
        fmt = "dcwt"
        extra = {}
        for w in dcwt.read_weights(path):
            rep = analyze_float(w)
            raw = np.ascontiguousarray(w.values).view(np.uint8).reshape(-1)
            layers.append(
                {
                    "name": w.name,
                    "rows": w.rows,
                    "cols": w.cols,
                    "near_zero_fraction": rep.near_zero_fraction,
                    "byte_entropy": rep.byte_entropy,
                    "uncompressed_bytes": int(raw.size),
                    "ans_bytes": _blob_len(raw),
                }
            )
    else:
        raise DataFormatError(f"{path}: neither a DCWT nor a DCC1 file")
    for row in layers:
        row["cr"] = compression_ratio(row["uncompressed_bytes"], row["ans_bytes"])
    n_total = sum(r["rows"] * r["cols"] for r in layers)
    u_total = sum(r["uncompressed_bytes"] for r in layers)
    a_total = sum(r["ans_bytes"] for r in layers)
    totals = {
        "uncompressed_bytes": u_total,
        "ans_bytes": a_total,
        "cr": compression_ratio(u_total, a_total) if u_total else 1.0,
        "near_zero_fraction": (
            sum(r["near_zero_fraction"] * r["rows"] * r["cols"] for r in layers) / n_total if n_total else 0.0
        ),
    }
    totals.update(extra)
    return {"format": fmt, "layers": layers, "totals": totals}


def _cmd_analyze(args) -> int:
    report = _analyze_report(args.infile)
    if args.json:
        print(json.dumps(report, indent=2))
        return 0
    print(f"format: {report['format']}")
    hdr = f"{'layer':<12} {'shape':>11} {'near-zero':>9} {'entropy':>8} {'cr':>8}"
    print(hdr)
    for r in report["layers"]:
        print(
            f"{r['name']:<12} {r['rows']:>5}x{r['cols']:<5} {r['near_zero_fraction']:>9.4f} "
            f"{r['byte_entropy']:>8.4f} {r['cr']:>8.4f}"
        )
    t = report["totals"]
    print(f"{'TOTAL':<12} {'':>11} {t['near_zero_fraction']:>9.4f} {'':>8} {t['cr']:>8.4f}")
    if "container_cr" in t:
        print(f"container: file CR {t['container_cr']:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    weights, stats = _load_inputs(args)
    calib = {}
    for i, w in enumerate(weights):
        rng = np.random.default_rng([args.seed, i])
        calib[w.name] = rng.normal(0.0, 1.0, (64, w.cols)) * stats[w.name].channel_max[None, :]
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["alpha", "cr", "near_zero", "layer_error"])
    for alpha in ALPHA_GRID:
        tensors = [quantize_scaled(w, stats[w.name], alpha) for w in weights]
        if args.sparsity > 0:
            cfg = PruneConfig(args.sparsity, PruneScope(args.scope))
            tensors = [prune(t, stats[t.name], cfg) for t in tensors]
        u = sum(t.qvalues.size for t in tensors)
        c = sum(_blob_len(t.qvalues.reshape(-1).view(np.uint8)) for t in tensors)
        nz = sum(analyze_quantized(t).near_zero_fraction * t.qvalues.size for t in tensors) / u
        err = float(
            np.mean([simulate_layer(calib[w.name], w, stats[w.name], alpha).quantized_error for w in weights])
        )
        writer.writerow([alpha, f"{u / c:.6f}", f"{nz:.6f}", f"{err:.6f}"])
    text = out.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_bench(args) -> int:
    n_rows = args.size_mib * 2**20 // 8192
    spec = SynthSpec(rows=n_rows, cols=8192, name="bench")
    w, stats = synth_ensemble(spec, args.seed)
    q = quantize_scaled(w, stats, 0.5)
    rows = bench.bench_codecs(q.qvalues.reshape(-1).view(np.uint8), repetitions=args.repetitions)
    if args.json:
        print(json.dumps({"bytes": int(q.qvalues.size), "rows": [r.to_dict() for r in rows]}, indent=2))
        return 0
    print(f"{'codec':<7} {'cr':>8} {'compress MB/s':>14} {'decompress MB/s':>16}")
    for r in rows:
        print(f"{r.codec:<7} {r.cr:>8.4f} {r.compress_mbps:>14.1f} {r.decompress_mbps:>16.1f}")
    return 0


def _cmd_simulate(args) -> int:
    if args.profile:
        with open(args.profile, encoding="utf-8") as f:
            profile = HardwareProfile.from_json(f.read())
    else:
        profile = REFERENCE_PROFILE
    if args.plan:
        with open(args.plan, encoding="utf-8") as f:
            plan = CompressionPlan.from_json(f.read())
    elif args.n_chunks is not None:
        plan = CompressionPlan.block_plan(args.chunk_size, args.n_chunks, args.block_size)
    elif args.budget is None:
        raise DcompError("need --plan or --n-chunks (or --budget with --n-chunks)")
    else:
        plan = None

    if args.budget is not None:
        if args.n_chunks is None:
            raise DcompError("--budget needs --n-chunks and --chunk-size")
        arch = Architecture(args.arch) if args.arch != "auto" else Architecture.GPU_BUFFER
        result = plan_partial(profile, args.n_chunks, args.chunk_size, args.cr, args.budget, arch)
        if args.json:
            doc = json.loads(result.report.to_json())
            doc["block_size"] = result.plan.block_size
            doc["feasible"] = result.feasible
            print(json.dumps(doc, indent=2))
        else:
            print(f"block_size: {result.plan.block_size}")
            print(f"compressed fraction: {result.plan.compressed_fraction:.4f}")
            print(f"latency: {result.report.per_sample_latency:.6e} s")
            if not result.feasible:
                print("warning: budget infeasible even with all chunks stored", file=sys.stderr)
        return 0

    cr = np.where(plan.compressed_mask, args.cr, 1.0)
    if args.arch == "auto":
        model_bytes = memory_footprint(plan, cr, buffer_chunks=0)
        arch = choose_architecture(profile, model_bytes, plan.chunk_size)
    else:
        arch = Architecture(args.arch)
    report = latency(profile, plan, arch, cr)
    if args.json:
        print(report.to_json())
    else:
        print(f"architecture: {report.architecture.value}")
        print(f"per-sample latency: {report.per_sample_latency:.6e} s")
        print(f"bottleneck: {report.bottleneck.value}")
        s = report.stage_seconds
        print(f"stage seconds: loading={s['loading']:.6e} decompression={s['decompression']:.6e} compute={s['compute']:.6e}")
        print(f"memory: gpu={report.memory_used_gpu:.3e} cpu={report.memory_used_cpu:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcomp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic weights + stats pair")
    sp.add_argument("--out-weights", required=True)
    sp.add_argument("--out-stats", required=True)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--preset", choices=["default", "single"], default="default")
    sp.add_argument("--rows", type=int, default=512)
    sp.add_argument("--cols", type=int, default=512)
    sp.add_argument("--name", default="synth")
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("quantize", help="scale + quantize DCWT weights into a container")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--stats", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--chunk-size", type=int, default=container.DEFAULT_CHUNK_SIZE)
    sp.set_defaults(func=_cmd_quantize)

    sp = sub.add_parser("prune", help="zero the lowest-scoring weight fraction")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--sparsity", type=float, required=True)
    sp.add_argument("--scope", choices=[s.value for s in PruneScope], default="per_tensor")
    sp.set_defaults(func=_cmd_prune)

    sp = sub.add_parser("pack", help="re-chunk and entropy-code a container")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--block-size", type=int, default=None)
    sp.add_argument("--codec", choices=["ans", "store"], default=None)
    sp.add_argument("--chunk-size", type=int, default=None)
    sp.set_defaults(func=_cmd_pack)

    sp = sub.add_parser("unpack", help="verify a container and rewrite it uncompressed")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_unpack)

    sp = sub.add_parser("analyze", help="distribution and compressibility report")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=_cmd_analyze)

    sp = sub.add_parser("sweep", help="CR/error sweep over the alpha grid (CSV)")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--stats", required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--sparsity", type=float, default=0.0)
    sp.add_argument("--scope", choices=[s.value for s in PruneScope], default="per_tensor")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("bench", help="codec throughput benchmark on synthetic weights")
    sp.add_argument("--size-mib", type=int, default=64)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--repetitions", type=int, default=3)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("simulate", help="latency model / partial-compression planner")
    sp.add_argument("--profile", default=None)
    sp.add_argument("--plan", default=None)
    sp.add_argument("--n-chunks", type=int, default=None)
    sp.add_argument("--chunk-size", type=int, default=container.DEFAULT_CHUNK_SIZE)
    sp.add_argument("--block-size", type=int, default=1)
    sp.add_argument("--cr", type=float, default=2.0)
    sp.add_argument("--arch", choices=[a.value for a in Architecture] + ["auto"], default="auto")
    sp.add_argument("--budget", type=float, default=None)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 4
    except DcompError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # noqa: BLE001 - last-resort guard for exit-code contract
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
