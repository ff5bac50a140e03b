"""Analytical FLOPs and token-compression accounting.

A transformer layer over a length-N sequence costs roughly
4*N^2*d (attention) + 16*N*d^2 (FFN); that is the "paper" mode.  The
"intermediate" mode swaps the FFN term for 2*N*d*d_ffn*k with an explicit
FFN width d_ffn and matmul-pass count k, which tracks gated-FFN models more
closely.  Per-layer visual token counts follow the schedule piecewise:
pi1*m before l_s, pi2*m before l_d, pi3*m after, floored the same way the
pipeline floors its stage targets.  The integrated compression ratio is the
layer-averaged fraction of visual tokens removed and deliberately uses the
un-floored products so it is a pure function of the ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .types import CostReport, ModelDims, PruneSchedule

FFN_MODES = ("paper", "intermediate")

# LLaMA-family FFN width ratio, used when intermediate mode gets no d_ffn.
_DEFAULT_FFN_RATIO = 2.6875


@dataclass
class FlopsConfig:
    """Cost-model inputs: model geometry plus the FFN accounting mode."""

    d: int
    n_layers: int
    n_text: int = 40
    attn_coeff: float = 4.0
    ffn_mode: str = "paper"
    ffn_coeff: float = 16.0        # paper mode: coefficient of N * d^2
    d_ffn: int | None = None       # intermediate mode FFN width
    ffn_passes: int = 3            # intermediate mode matmuls through d_ffn

    def __post_init__(self) -> None:
        if self.d < 1 or self.n_layers < 1:
            raise ValueError("hidden size and layer count must be >= 1")
        if self.n_text < 0:
            raise ValueError("text token count must be >= 0")
        if self.ffn_mode not in FFN_MODES:
            raise ValueError(f"unknown ffn mode {self.ffn_mode!r}")

    @property
    def ffn_width(self) -> int:
        return self.d_ffn if self.d_ffn is not None else round(_DEFAULT_FFN_RATIO * self.d)

    @classmethod
    def from_model(cls, model: ModelDims, ffn_mode: str = "paper", **kw) -> "FlopsConfig":
        return cls(
            d=model.d,
            n_layers=model.n_layers,
            n_text=model.n_text,
            ffn_mode=ffn_mode,
            ffn_coeff=model.ffn_coefficient,
            **kw,
        )


def flops_layer(n_seq: float, cfg: FlopsConfig) -> float:
    """FLOPs of one transformer layer at sequence length n_seq."""
    if n_seq < 0:
        raise ValueError("sequence length must be >= 0")
    attn = cfg.attn_coeff * n_seq * n_seq * cfg.d
    if cfg.ffn_mode == "paper":
        ffn = cfg.ffn_coeff * n_seq * cfg.d * cfg.d
    else:
        ffn = 2.0 * n_seq * cfg.d * cfg.ffn_width * cfg.ffn_passes
    return attn + ffn


def nv_at_layer(layer: int, schedule: PruneSchedule) -> int:
    """Visual token count at a 1-based LLM layer under the schedule."""
    n_layers = schedule.model.n_layers
    if not 1 <= layer <= n_layers:
        raise ValueError(f"layer {layer} outside 1..{n_layers}")
    k1, b, k3 = schedule.stage_targets()
    if layer < schedule.l_s:
        return k1
    if layer < schedule.l_d:
        return b
    return k3


def nv_profile(schedule: PruneSchedule) -> list[int]:
    return [nv_at_layer(layer, schedule) for layer in range(1, schedule.model.n_layers + 1)]


def total_flops(schedule: PruneSchedule, cfg: FlopsConfig | None = None) -> float:
    """Whole-LLM FLOPs under the schedule's per-layer token counts."""
    cfg = cfg or FlopsConfig.from_model(schedule.model)
    return flops_for_counts(nv_profile(schedule), cfg)


def flops_for_counts(nv_per_layer: list[int], cfg: FlopsConfig) -> float:
    return sum(flops_layer(nv + cfg.n_text, cfg) for nv in nv_per_layer)


def vanilla_flops(m: int, cfg: FlopsConfig) -> float:
    """Cost with no pruning: every layer sees all m visual tokens."""
    return cfg.n_layers * flops_layer(m + cfg.n_text, cfg)


def integrated_compression_ratio(schedule: PruneSchedule) -> float:
    """Layer-averaged fraction of visual tokens removed, in [0, 1)."""
    m = schedule.model.m
    n = schedule.model.n_layers
    kept = (
        schedule.pi1 * m * (schedule.l_s - 1)
        + schedule.pi2 * m * (schedule.l_d - schedule.l_s)
        + schedule.pi3 * m * (n - schedule.l_d + 1)
    )
    return 1.0 - kept / (n * m)


def stage_overhead_ops(schedule: PruneSchedule) -> dict[str, float]:
    """Unit-constant estimates of the pruning stages' own work.

    Stage I sorts m scores, Stage II is dominated by the O((pi1*m)^2)
    pairwise distances, Stage III sorts the pi2*m live tokens.
    """
    m = schedule.model.m
    k1, b, _ = schedule.stage_targets()
    return {
        "stage1_topk": m * math.log2(m) if m > 1 else 0.0,
        "stage2_clustering": float(k1) ** 2,
        "stage3_topk": b * math.log2(b) if b > 1 else 0.0,
    }


def cost_report(
    schedule: PruneSchedule,
    cfg: FlopsConfig | None = None,
    realized_nv: list[int] | None = None,
) -> CostReport:
    """Assemble the report, from the schedule or from realized counts.

    With realized counts (a pipeline run's actual per-layer profile) both
    the FLOPs total and the compression ratio are computed from them; the
    schedule-only report uses the analytical formulas instead.
    """
    cfg = cfg or FlopsConfig.from_model(schedule.model)
    m = schedule.model.m
    n = schedule.model.n_layers
    if realized_nv is None:
        nv = nv_profile(schedule)
        cr = integrated_compression_ratio(schedule)
    else:
        if len(realized_nv) != n:
            raise ValueError(f"realized counts cover {len(realized_nv)} of {n} layers")
        nv = list(realized_nv)
        cr = 1.0 - sum(nv) / (n * m)
    return CostReport(
        nv_per_layer=nv,
        flops_total=flops_for_counts(nv, cfg),
        flops_vanilla=vanilla_flops(m, cfg),
        cr_int=cr,
        ffn_mode=cfg.ffn_mode,
        overhead_ops=stage_overhead_ops(schedule),
    )
