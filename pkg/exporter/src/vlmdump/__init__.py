"""Dump activation bundles from a torch vision-language model run.

Captures, via forward hooks on an unpruned forward pass: the `[CLS]`
attention row at the vision encoder's penultimate layer, the post-projector
visual token embeddings, and per-head key vectors at the requested decoder
layers.  Bundles are written in the engine's container format (see the
repository-level FORMATS.md); the engine is consumed only through that
file contract.
"""

__version__ = "0.1.0"

from .capture import CaptureError, Captured, patch_positions, probe_capture_points, run_capture
from .export import ExportConfig, export_bundles, load_image
from .model import MODEL_NAMES, LvlmSpec, TinyLVLM, build_model, model_spec
from .writer import write_bundle

__all__ = [
    "CaptureError",
    "Captured",
    "ExportConfig",
    "LvlmSpec",
    "MODEL_NAMES",
    "TinyLVLM",
    "build_model",
    "export_bundles",
    "load_image",
    "model_spec",
    "patch_positions",
    "probe_capture_points",
    "run_capture",
    "write_bundle",
]
