"""Desk-scale vision-language models with hookable capture points.

These are real torch modules executed with a real forward pass; weights are
random but seeded, so runs are reproducible.  The architecture mirrors the
capture points a production LVLM exposes:

* a ViT-style vision encoder whose attention module returns per-head
  softmax probabilities (the `[CLS]` row at the penultimate block is what
  gets dumped),
* a linear projector from encoder width to LLM width,
* a decoder stack with explicit ``k_proj`` linears, so key vectors can be
  captured by a plain forward hook, *before* any positional rotation is
  applied (these models apply none; the dumped norms are therefore
  position-independent).

The sequence fed to the decoder is ``[visual tokens, text tokens]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class LvlmSpec:
    name: str
    image_size: int
    patch_size: int
    enc_width: int
    enc_heads: int
    enc_layers: int
    llm_width: int
    llm_heads: int
    llm_layers: int
    n_text: int
    use_cls: bool = True

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def n_patches(self) -> int:
        return self.grid * self.grid

    @property
    def d_head(self) -> int:
        return self.llm_width // self.llm_heads


class SelfAttention(nn.Module):
    """Multi-head self-attention that returns per-head probabilities."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise ValueError("width must divide evenly into heads")
        self.heads = heads
        self.d_head = width // heads
        self.qkv = nn.Linear(width, 3 * width)
        self.out = nn.Linear(width, width)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        b, n, _ = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        q = q.view(b, n, self.heads, self.d_head).transpose(1, 2)
        k = k.view(b, n, self.heads, self.d_head).transpose(1, 2)
        v = v.view(b, n, self.heads, self.d_head).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        probs = logits.softmax(dim=-1)                    # (b, heads, n, n)
        mixed = (probs @ v).transpose(1, 2).reshape(b, n, -1)
        return self.out(mixed), probs


class EncoderBlock(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(width)
        self.attn = SelfAttention(width, heads)
        self.ln2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, 4 * width), nn.GELU(), nn.Linear(4 * width, width)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        attn_out, _ = self.attn(self.ln1(x))
        x = x + attn_out
        return x + self.mlp(self.ln2(x))


class VisionEncoder(nn.Module):
    def __init__(self, spec: LvlmSpec):
        super().__init__()
        self.spec = spec
        self.patch_embed = nn.Conv2d(
            3, spec.enc_width, kernel_size=spec.patch_size, stride=spec.patch_size
        )
        self.cls_token = (
            nn.Parameter(torch.zeros(1, 1, spec.enc_width)) if spec.use_cls else None
        )
        seq = spec.n_patches + (1 if spec.use_cls else 0)
        self.pos_embed = nn.Parameter(torch.zeros(1, seq, spec.enc_width))
        self.blocks = nn.ModuleList(
            EncoderBlock(spec.enc_width, spec.enc_heads) for _ in range(spec.enc_layers)
        )

    def forward(self, pixels: torch.Tensor) -> torch.Tensor:
        b = pixels.shape[0]
        x = self.patch_embed(pixels).flatten(2).transpose(1, 2)   # (b, patches, width)
        if self.cls_token is not None:
            x = torch.cat([self.cls_token.expand(b, -1, -1), x], dim=1)
        x = x + self.pos_embed
        for block in self.blocks:
            x = block(x)
        if self.cls_token is not None:
            return x[:, 1:, :]   # patch tokens only
        return x


class DecoderLayer(nn.Module):
    """Pre-LN decoder block with separate q/k/v projections.

    ``k_proj`` output is the capture point for key vectors: keys as
    projected, before attention and without positional rotation.
    """

    def __init__(self, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise ValueError("width must divide evenly into heads")
        self.heads = heads
        self.d_head = width // heads
        self.ln1 = nn.LayerNorm(width)
        self.q_proj = nn.Linear(width, width)
        self.k_proj = nn.Linear(width, width)
        self.v_proj = nn.Linear(width, width)
        self.o_proj = nn.Linear(width, width)
        self.ln2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, 4 * width), nn.GELU(), nn.Linear(4 * width, width)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.ln1(x)
        b, n, _ = h.shape
        q = self.q_proj(h).view(b, n, self.heads, self.d_head).transpose(1, 2)
        k = self.k_proj(h).view(b, n, self.heads, self.d_head).transpose(1, 2)
        v = self.v_proj(h).view(b, n, self.heads, self.d_head).transpose(1, 2)
        probs = (q @ k.transpose(-2, -1) / math.sqrt(self.d_head)).softmax(dim=-1)
        mixed = (probs @ v).transpose(1, 2).reshape(b, n, -1)
        x = x + self.o_proj(mixed)
        return x + self.mlp(self.ln2(x))


class TinyLVLM(nn.Module):
    def __init__(self, spec: LvlmSpec):
        super().__init__()
        self.spec = spec
        self.encoder = VisionEncoder(spec)
        self.projector = nn.Linear(spec.enc_width, spec.llm_width)
        self.text_embed = nn.Embedding(256, spec.llm_width)
        self.layers = nn.ModuleList(
            DecoderLayer(spec.llm_width, spec.llm_heads) for _ in range(spec.llm_layers)
        )

    def forward(self, pixels: torch.Tensor) -> torch.Tensor:
        visual = self.projector(self.encoder(pixels))
        b = pixels.shape[0]
        text_ids = torch.arange(self.spec.n_text).unsqueeze(0).expand(b, -1)
        x = torch.cat([visual, self.text_embed(text_ids)], dim=1)
        for layer in self.layers:
            x = layer(x)
        return x


_SPECS = {
    "tiny-lvlm-576": LvlmSpec(
        name="tiny-lvlm-576",
        image_size=48,
        patch_size=2,
        enc_width=32,
        enc_heads=4,
        enc_layers=3,
        llm_width=128,
        llm_heads=4,
        llm_layers=32,
        n_text=40,
    ),
    "tiny-lvlm-144": LvlmSpec(
        name="tiny-lvlm-144",
        image_size=24,
        patch_size=2,
        enc_width=32,
        enc_heads=4,
        enc_layers=3,
        llm_width=64,
        llm_heads=2,
        llm_layers=8,
        n_text=12,
    ),
    "tiny-lvlm-576-nocls": LvlmSpec(
        name="tiny-lvlm-576-nocls",
        image_size=48,
        patch_size=2,
        enc_width=32,
        enc_heads=4,
        enc_layers=3,
        llm_width=128,
        llm_heads=4,
        llm_layers=32,
        n_text=40,
        use_cls=False,
    ),
}

MODEL_NAMES = tuple(sorted(_SPECS))


def model_spec(name: str) -> LvlmSpec:
    if name not in _SPECS:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    return _SPECS[name]


def build_model(name: str, seed: int = 0) -> TinyLVLM:
    """Instantiate a registry model with seeded random weights."""
    spec = model_spec(name)
    torch.manual_seed(seed)
    model = TinyLVLM(spec)
    with torch.no_grad():
        for p in model.parameters():
            if p.ndim >= 2:
                nn.init.normal_(p, std=0.3)
            else:
                nn.init.normal_(p, std=0.05)
    model.eval()
    return model
