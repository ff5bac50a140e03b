"""Export activation bundles from a model run over image inputs."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from .capture import CaptureError, patch_positions, probe_capture_points, run_capture
from .model import build_model, model_spec
from .writer import write_bundle


@dataclass
class ExportConfig:
    model: str
    inputs: list[str]                    # image files (video: pre-extracted frames)
    out_dir: str
    layers: tuple[int, int] = (2, 22)    # 1-based decoder layers to dump keys at
    max_samples: int | None = None
    seed: int = 0


@dataclass
class _Check:
    ok: bool
    problems: list[str] = field(default_factory=list)


def load_image(path: str, image_size: int) -> torch.Tensor:
    """Image file -> (1, 3, H, W) float tensor in [-1, 1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((image_size, image_size), Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    return torch.from_numpy(arr.transpose(2, 0, 1) * 2.0 - 1.0).unsqueeze(0)


def export_bundles(config: ExportConfig) -> int:
    """Run the model over every input and write one bundle per sample.

    Capture points are probed before any inference, so a model that lacks
    one (no [CLS] token, missing layer) fails with zero files written.
    Deterministic: fixed seed, eval mode, single-threaded inference.
    """
    spec = model_spec(config.model)
    model = build_model(config.model, seed=config.seed)
    probe_capture_points(model, config.layers)
    if spec.d_head * spec.llm_heads != spec.llm_width:
        raise CaptureError("head geometry inconsistent")

    inputs = config.inputs[: config.max_samples] if config.max_samples else config.inputs
    if not inputs:
        raise ValueError("no inputs to export")

    os.makedirs(config.out_dir, exist_ok=True)
    old_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        written = 0
        positions = patch_positions(spec.grid)
        for path in inputs:
            pixels = load_image(path, spec.image_size)
            captured = run_capture(model, pixels, config.layers)

            meta = {
                "model": spec.name,
                "m": spec.n_patches,
                "d": spec.llm_width,
                "n_layers": spec.llm_layers,
                "h_enc": spec.enc_heads,
                "h_llm": spec.llm_heads,
                "d_head": spec.d_head,
                "layers": list(config.layers),
            }
            check = _self_check(meta, captured.token_features, positions,
                                captured.cls_attention, captured.key_vectors)
            if not check.ok:
                raise CaptureError(
                    f"{path}: captured tensors violate bundle invariants: "
                    + "; ".join(check.problems)
                )

            stem = os.path.splitext(os.path.basename(path))[0]
            write_bundle(
                os.path.join(config.out_dir, f"{stem}.vtb"),
                meta,
                captured.token_features,
                positions,
                captured.cls_attention,
                captured.key_vectors,
            )
            written += 1
        return written
    finally:
        torch.set_num_threads(old_threads)


def _self_check(meta, features, positions, cls_attention, key_vectors) -> _Check:
    """Mirror of the engine's bundle invariants, checked before writing."""
    problems = []
    n = meta["m"]
    if features.shape[0] != n:
        problems.append(f"{features.shape[0]} feature rows for m={n}")
    if positions.shape != (n, 2) or positions.min() < 0.0 or positions.max() > 1.0:
        problems.append("positions outside [0,1] grid convention")
    if cls_attention.shape != (meta["h_enc"], n):
        problems.append(f"cls attention shape {cls_attention.shape}")
    if cls_attention.min() < 0.0:
        problems.append("negative attention weight")
    for layer, keys in key_vectors.items():
        if keys.shape != (meta["h_llm"], n, meta["d_head"]):
            problems.append(f"keys at layer {layer}: shape {keys.shape}")
    for name, arr in (("features", features), ("cls", cls_attention)):
        if not np.all(np.isfinite(arr)):
            problems.append(f"non-finite {name}")
    return _Check(ok=not problems, problems=problems)
