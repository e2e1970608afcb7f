"""Compression toolkit for INT8 neural-net weights.

Scaling and pruning reshape quantized weight distributions so a chunked
rANS coder can shrink them losslessly; a latency model picks how much of
a model to compress for a given hardware profile.
"""

from .errors import (
    BadMagicError,
    ChecksumError,
    CorruptStreamError,
    DataFormatError,
    DcompError,
    InternalError,
    TruncatedError,
    UnsupportedVersionError,
)
from .tensors import (
    ActivationStats,
    DEFAULT_LAYERS,
    DEFAULT_SEED,
    DistributionReport,
    SynthSpec,
    WeightTensor,
    analyze_float,
    analyze_quantized,
    compression_ratio,
    default_ensemble,
    synth_ensemble,
)
from .scaling import (
    ALPHA_GRID,
    LayerErrorReport,
    QuantizedTensor,
    ScaleVector,
    compute_scale,
    dequantize,
    quantize,
    quantize_scaled,
    scale_weights,
    simulate_layer,
)
from .pruning import PruneConfig, PruneScope, prune, prune_scores
from .ans import AnsTable, ans_compress, ans_decompress, compress_blob, decompress_blob
from .container import (
    DEFAULT_CHUNK_SIZE,
    ContainerInfo,
    ModelBundle,
    inspect,
    pack,
    unpack,
    write_container,
)
from .latency import (
    Architecture,
    Bottleneck,
    CompressionPlan,
    HardwareProfile,
    LatencyReport,
    PlanResult,
    REFERENCE_PROFILE,
    choose_architecture,
    d_gpu,
    effective_loading,
    fit_speed_curve,
    latency,
    memory_footprint,
    plan_partial,
)
from .bench import BenchRow, bench_codecs
from . import dcwt

__version__ = "0.1.0"

__all__ = [
    "ActivationStats",
    "ALPHA_GRID",
    "AnsTable",
    "Architecture",
    "BadMagicError",
    "BenchRow",
    "Bottleneck",
    "ChecksumError",
    "CompressionPlan",
    "ContainerInfo",
    "CorruptStreamError",
    "DataFormatError",
    "DcompError",
    "DEFAULT_CHUNK_SIZE",
    "DEFAULT_LAYERS",
    "DEFAULT_SEED",
    "DistributionReport",
    "HardwareProfile",
    "InternalError",
    "LatencyReport",
    "LayerErrorReport",
    "ModelBundle",
    "PlanResult",
    "PruneConfig",
    "PruneScope",
    "QuantizedTensor",
    "REFERENCE_PROFILE",
    "ScaleVector",
    "SynthSpec",
    "TruncatedError",
    "UnsupportedVersionError",
    "WeightTensor",
    "analyze_float",
    "analyze_quantized",
    "ans_compress",
    "ans_decompress",
    "bench_codecs",
    "choose_architecture",
    "compress_blob",
    "compression_ratio",
    "compute_scale",
    "d_gpu",
    "dcwt",
    "decompress_blob",
    "default_ensemble",
    "dequantize",
    "effective_loading",
    "fit_speed_curve",
    "inspect",
    "latency",
    "memory_footprint",
    "pack",
    "plan_partial",
    "prune",
    "prune_scores",
    "quantize",
    "quantize_scaled",
    "scale_weights",
    "simulate_layer",
    "synth_ensemble",
    "unpack",
    "write_container",
]
