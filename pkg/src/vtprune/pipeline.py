"""Three-stage pruning pipeline over an activation bundle.

Stage I keeps the floor(m*pi1) tokens with the highest CLS-attention
saliency at the encoder output.  Stage II fires at LLM layer l_s: cluster
the survivors, then keep per-cluster elites by smallest key norm and merge
each cluster's remainder (budget floor(m*pi2)).  Stage III fires at layer
l_d and keeps the floor(m*pi3) smallest-key-norm tokens.  Baseline
strategies share the stage placement and budgets but replace Stage II's
collaborative route with a single scoring rule.

A stage whose target already covers the live set is a no-op and says so in
its trace; the identity schedule (all ratios 1, alpha 1) therefore passes
tokens through untouched.

Fidelity note: the engine never re-runs the LLM between stages.  Stage III
scores come from the bundle's *unpruned* forward-pass key dump; a merged
token is scored through the per-head mean of its members' key vectors at
l_d.  Reports carry this note in their header.
"""

from __future__ import annotations

import numpy as np

from .clustering import cluster
from .copruning import coprune
from .costmodel import FlopsConfig, cost_report
from .saliency import cls_saliency, key_l2_norm, select_top_k
from .types import (
    KIND_KEPT,
    ActivationBundle,
    CostReport,
    PruneSchedule,
    PruneStrategy,
    StageTrace,
    TokenSet,
    validate_bundle,
)

FIDELITY_NOTE = (
    "stage II/III key norms are read from an unpruned forward-pass dump; "
    "merged tokens are scored via the per-head mean of their members' keys"
)


def _kind_counts(tokens: TokenSet) -> dict[str, int]:
    counts: dict[str, int] = {}
    for kind in tokens.kind:
        counts[kind] = counts.get(kind, 0) + 1
    return counts


def _representatives(tokens: TokenSet) -> list[int]:
    return [min(o) for o in tokens.origin]


def _trace(stage: str, n_in: int, tokens: TokenSet, note: str | None = None) -> StageTrace:
    return StageTrace(
        stage=stage,
        input_count=n_in,
        output_count=len(tokens),
        kept=_representatives(tokens),
        kind_counts=_kind_counts(tokens),
        note=note,
    )


def run_stage1(bundle: ActivationBundle, pi1: float) -> tuple[TokenSet, StageTrace]:
    """Encoder-output pruning: keep the top floor(m*pi1) by CLS saliency."""
    m = bundle.meta.m
    k1 = int(np.floor(m * pi1))
    if k1 < 1:
        raise ValueError(f"stage I target floor({m} * {pi1}) < 1")
    kept = select_top_k(cls_saliency(bundle.cls_attention), k1)
    tokens = TokenSet(
        features=np.asarray(bundle.token_features, dtype=np.float64)[kept],
        positions=np.asarray(bundle.token_positions, dtype=np.float64)[kept],
        origin=[(i,) for i in kept],
        kind=[KIND_KEPT] * k1,
    )
    return tokens, _trace("I", m, tokens)


def run_stage2(
    tokens: TokenSet,
    key_vectors: np.ndarray,
    schedule: PruneSchedule,
) -> tuple[TokenSet, StageTrace]:
    """Shallow-layer collaborative pruning down to at most floor(m*pi2).

    ``key_vectors`` must cover exactly the live tokens (heads, k, d_head).
    Skips with a note when the budget already covers the live set.
    """
    k = len(tokens)
    budget = int(np.floor(schedule.model.m * schedule.pi2))
    if budget >= k:
        return tokens, _trace("II", k, tokens, note="budget covers live set; no-op")

    n_centers = int(np.ceil(k * schedule.alpha))
    if budget <= n_centers:
        raise ValueError(
            f"budget cannot cover one merged token per cluster: "
            f"B={budget} <= N_c={n_centers}"
        )
    assignment = cluster(
        tokens.features, tokens.positions, schedule.d_c, schedule.tau, schedule.alpha
    )
    out = coprune(tokens, assignment, key_l2_norm(key_vectors), budget)
    return out, _trace("II", k, out)


def run_stage3(
    tokens: TokenSet,
    key_vectors: np.ndarray,
    pi3: float,
    m: int,
) -> tuple[TokenSet, StageTrace]:
    """Deep-layer pruning: keep the floor(m*pi3) smallest key norms."""
    k = len(tokens)
    k3 = int(np.floor(m * pi3))
    if k3 >= k:
        return tokens, _trace("III", k, tokens, note="target covers live set; no-op")
    kept = select_top_k(key_l2_norm(key_vectors), k3)
    out = TokenSet(
        features=tokens.features[kept],
        positions=tokens.positions[kept],
        origin=[tokens.origin[i] for i in kept],
        kind=[tokens.kind[i] for i in kept],
    )
    return out, _trace("III", k, out)


def keys_for_tokens(full_keys: np.ndarray, tokens: TokenSet) -> np.ndarray:
    """Assemble (heads, k, d_head) key vectors for a live token set.

    Singleton tokens take their dumped key directly; merged tokens take the
    per-head mean over their members (the key-space mirror of feature
    merging).
    """
    keys = np.asarray(full_keys, dtype=np.float64)
    cols = []
    for origin in tokens.origin:
        if len(origin) == 1:
            cols.append(keys[:, origin[0], :])
        else:
            cols.append(keys[:, list(origin), :].mean(axis=1))
    return np.stack(cols, axis=1)


def _baseline_stage2(
    tokens: TokenSet,
    bundle: ActivationBundle,
    schedule: PruneSchedule,
    strategy: PruneStrategy,
) -> tuple[TokenSet, StageTrace]:
    k = len(tokens)
    budget = int(np.floor(schedule.model.m * schedule.pi2))
    if budget >= k:
        return tokens, _trace("II", k, tokens, note="budget covers live set; no-op")

    live = [o[0] for o in tokens.origin]
    if strategy.variant == "random_baseline":
        rng = np.random.default_rng(strategy.seed)
        kept = sorted(int(i) for i in rng.choice(k, size=budget, replace=False))
    else:
        if strategy.variant == "attention_topk_baseline":
            scores = cls_saliency(np.asarray(bundle.cls_attention)[:, live])
        elif strategy.variant == "norm_only":
            scores = key_l2_norm(_dumped_keys(bundle, schedule.l_s)[:, live, :])
        elif strategy.variant == "attention_only":
            if schedule.l_s not in bundle.text_attention:
                raise ValueError(
                    f"attention_only needs a text_attention dump at layer {schedule.l_s}"
                )
            scores = cls_saliency(np.asarray(bundle.text_attention[schedule.l_s])[:, live])
        else:
            raise ValueError(f"unhandled strategy {strategy.variant!r}")
        kept = select_top_k(scores, budget)

    out = TokenSet(
        features=tokens.features[kept],
        positions=tokens.positions[kept],
        origin=[tokens.origin[i] for i in kept],
        kind=[tokens.kind[i] for i in kept],
    )
    return out, _trace("II", k, out, note=f"baseline scoring: {strategy.variant}")


def _dumped_keys(bundle: ActivationBundle, layer: int) -> np.ndarray:
    if layer not in bundle.key_vectors:
        raise ValueError(f"bundle has no key vectors for layer {layer}")
    return np.asarray(bundle.key_vectors[layer], dtype=np.float64)


def run_pipeline(
    bundle: ActivationBundle,
    schedule: PruneSchedule,
    strategy: PruneStrategy | None = None,
    cfg: FlopsConfig | None = None,
) -> tuple[TokenSet, list[StageTrace], CostReport]:
    """Run all three stages and account the realized per-layer costs."""
    strategy = strategy or PruneStrategy()
    violations = validate_bundle(bundle)
    if violations:
        raise ValueError("invalid bundle: " + "; ".join(violations))
    if bundle.meta.m != schedule.model.m:
        raise ValueError(
            f"schedule is for m={schedule.model.m} but bundle has m={bundle.meta.m}"
        )

    for layer in (schedule.l_s, schedule.l_d):
        _dumped_keys(bundle, layer)   # fail early, naming the layer

    tokens, trace1 = run_stage1(bundle, schedule.pi1)

    if strategy.variant == "vitcop":
        keys_ls = _dumped_keys(bundle, schedule.l_s)
        live = [o[0] for o in tokens.origin]
        tokens, trace2 = run_stage2(tokens, keys_ls[:, live, :], schedule)
    else:
        tokens, trace2 = _baseline_stage2(tokens, bundle, schedule, strategy)

    keys_ld = _dumped_keys(bundle, schedule.l_d)
    tokens, trace3 = run_stage3(
        tokens, keys_for_tokens(keys_ld, tokens), schedule.pi3, schedule.model.m
    )

    traces = [trace1, trace2, trace3]
    report = cost_report(
        schedule,
        cfg=cfg or FlopsConfig.from_model(schedule.model),
        realized_nv=realized_profile(schedule, traces),
    )
    return tokens, traces, report


def realized_profile(schedule: PruneSchedule, traces: list[StageTrace]) -> list[int]:
    """Per-layer visual token counts a pipeline run actually produced."""
    by_stage = {t.stage: t.output_count for t in traces}
    n = schedule.model.n_layers
    return (
        [by_stage["I"]] * (schedule.l_s - 1)
        + [by_stage["II"]] * (schedule.l_d - schedule.l_s)
        + [by_stage["III"]] * (n - schedule.l_d + 1)
    )
