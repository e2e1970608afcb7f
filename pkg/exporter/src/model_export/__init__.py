"""Checkpoint-to-DCWT bridge: linear weights + calibration activation maxima."""

from .export import ExportManifest, check_coverage, collect_activation_stats, export_weights

__version__ = "0.1.0"

__all__ = [
    "ExportManifest",
    "check_coverage",
    "collect_activation_stats",
    "export_weights",
]
