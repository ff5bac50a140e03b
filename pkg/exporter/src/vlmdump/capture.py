"""Forward-hook capture of the tensors a bundle needs.

The capture never modifies the model: it attaches forward hooks to the
penultimate encoder block's attention (for the `[CLS]` row), to the
projector (for the LLM-input visual embeddings), and to each requested
decoder layer's ``k_proj`` (for per-head key vectors), then runs one
unpruned forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .model import TinyLVLM


class CaptureError(RuntimeError):
    """A requested capture point does not exist on this model."""


@dataclass
class Captured:
    cls_attention: np.ndarray                  # (h_enc, n_patches)
    token_features: np.ndarray                 # (n_patches, llm_width)
    key_vectors: dict[int, np.ndarray] = field(default_factory=dict)
    # layer -> (h_llm, n_patches, d_head)


def probe_capture_points(model: TinyLVLM, layers: tuple[int, ...]) -> None:
    """Fail fast, before any file is written, if a capture point is absent."""
    spec = model.spec
    if not spec.use_cls:
        raise CaptureError(
            f"model {spec.name!r} has no [CLS] token; encoder saliency cannot be captured"
        )
    if spec.enc_layers < 2:
        raise CaptureError("encoder too shallow to have a penultimate layer")
    for layer in layers:
        if not 1 <= layer <= spec.llm_layers:
            raise CaptureError(
                f"decoder layer {layer} outside 1..{spec.llm_layers} of {spec.name!r}"
            )


def run_capture(model: TinyLVLM, pixels: torch.Tensor, layers: tuple[int, ...]) -> Captured:
    """One unpruned forward pass with hooks; returns the dumped tensors."""
    probe_capture_points(model, layers)
    spec = model.spec
    n = spec.n_patches

    grabbed: dict[str, torch.Tensor] = {}
    handles = []

    def grab(name):
        def hook(_module, _inputs, output):
            grabbed[name] = output[1] if isinstance(output, tuple) else output

        return hook

    # penultimate encoder block attention probabilities
    handles.append(model.encoder.blocks[-2].attn.register_forward_hook(grab("enc_attn")))
    handles.append(model.projector.register_forward_hook(grab("visual_embeds")))
    for layer in layers:
        handles.append(
            model.layers[layer - 1].k_proj.register_forward_hook(grab(f"keys_l{layer}"))
        )

    try:
        with torch.no_grad():
            model(pixels)
    finally:
        for handle in handles:
            handle.remove()

    # softmax row from the [CLS] query (index 0) to every patch key
    probs = grabbed["enc_attn"]                        # (1, h_enc, seq, seq)
    cls_attention = probs[0, :, 0, 1:].cpu().numpy().astype(np.float32)

    token_features = grabbed["visual_embeds"][0].cpu().numpy().astype(np.float32)

    key_vectors = {}
    for layer in layers:
        flat = grabbed[f"keys_l{layer}"][0]            # (seq, llm_width)
        per_head = flat.view(flat.shape[0], spec.llm_heads, spec.d_head).permute(1, 0, 2)
        key_vectors[layer] = per_head[:, :n, :].cpu().numpy().astype(np.float32)

    if cls_attention.shape != (spec.enc_heads, n):
        raise CaptureError(f"cls attention came out {cls_attention.shape}")
    if token_features.shape != (n, spec.llm_width):
        raise CaptureError(f"visual embeddings came out {token_features.shape}")
    return Captured(
        cls_attention=cls_attention,
        token_features=token_features,
        key_vectors=key_vectors,
    )


def patch_positions(grid: int) -> np.ndarray:
    """Normalized patch-center coordinates, row-major to match the patchifier."""
    rows, cols = np.divmod(np.arange(grid * grid), grid)
    return np.stack(
        [(rows + 0.5) / grid, (cols + 0.5) / grid], axis=1
    ).astype(np.float32)
