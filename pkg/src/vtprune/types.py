"""Shared domain types for the pruning engine.

Everything downstream (saliency scoring, clustering, co-pruning, cost
accounting, file I/O) works on the value types defined here.  Instances are
treated as immutable after construction: no stage mutates its input, each
stage returns fresh objects.  Tensor payloads are float32 in storage
(bundle files); computation everywhere else is done in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KIND_KEPT = "kept"
KIND_ELITE = "elite"
KIND_MERGED = "merged"
TOKEN_KINDS = (KIND_KEPT, KIND_ELITE, KIND_MERGED)

STRATEGY_VARIANTS = (
    "vitcop",
    "attention_topk_baseline",
    "random_baseline",
    "norm_only",
    "attention_only",
)


@dataclass
class BundleMeta:
    """Model geometry a bundle was dumped from."""

    model: str
    m: int            # original visual token count
    d: int            # LLM hidden size (cost model input, not a shape constraint)
    n_layers: int
    h_enc: int        # vision-encoder attention heads
    h_llm: int        # LLM attention heads
    d_head: int       # LLM per-head key dimension
    layers: tuple[int, ...] = ()   # 1-based LLM layers with dumped key vectors

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "m": self.m,
            "d": self.d,
            "n_layers": self.n_layers,
            "h_enc": self.h_enc,
            "h_llm": self.h_llm,
            "d_head": self.d_head,
            "layers": list(self.layers),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "BundleMeta":
        return cls(
            model=str(raw["model"]),
            m=int(raw["m"]),
            d=int(raw["d"]),
            n_layers=int(raw["n_layers"]),
            h_enc=int(raw["h_enc"]),
            h_llm=int(raw["h_llm"]),
            d_head=int(raw["d_head"]),
            layers=tuple(int(x) for x in raw.get("layers", ())),
        )


@dataclass
class ActivationBundle:
    """One sample's dumped activations.

    token_features   (n, d_feat)  visual token embeddings as fed to the LLM
                                  (post-projection space; d_feat is free of
                                  ``meta.d``)
    token_positions  (n, 2)       normalized patch-grid coordinates in [0,1]^2,
                                  (row+0.5)/grid_h and (col+0.5)/grid_w
    cls_attention    (H_enc, n)   softmax attention from the [CLS] token to
                                  each patch token, vision-encoder penultimate
                                  layer
    key_vectors      layer -> (H_llm, n_live, d_head) per-head key vectors
                                  from an unpruned forward pass
    text_attention   layer -> (H_llm, n) optional text-to-visual attention
                                  mass (baseline-comparison extension)
    """

    token_features: np.ndarray
    token_positions: np.ndarray
    cls_attention: np.ndarray
    key_vectors: dict[int, np.ndarray]
    meta: BundleMeta
    text_attention: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_tokens(self) -> int:
        return int(self.token_features.shape[0])


@dataclass
class TokenSet:
    """Live working set during pruning.

    ``origin[i]`` lists the original bundle indices a token stands for:
    a singleton for kept/elite tokens, the merged members otherwise.
    Origin lists are disjoint across tokens.
    """

    features: np.ndarray          # (k, d_feat) float64
    positions: np.ndarray         # (k, 2) float64
    origin: list[tuple[int, ...]]
    kind: list[str]

    def __len__(self) -> int:
        return int(self.features.shape[0])

    def origin_union(self) -> set[int]:
        out: set[int] = set()
        for o in self.origin:
            out.update(o)
        return out

    def violations(self, m: int | None = None) -> list[str]:
        """Check the TokenSet invariants; empty list means all hold."""
        bad: list[str] = []
        k = len(self)
        if self.positions.shape != (k, 2):
            bad.append(f"positions: shape {self.positions.shape} != ({k}, 2)")
        if len(self.origin) != k or len(self.kind) != k:
            bad.append("origin/kind: length disagrees with feature rows")
            return bad
        seen: set[int] = set()
        total = 0
        for i, o in enumerate(self.origin):
            if len(o) == 0:
                bad.append(f"origin[{i}]: empty")
            total += len(o)
            seen.update(o)
            if m is not None and any(j >= m or j < 0 for j in o):
                bad.append(f"origin[{i}]: index outside 0..{m - 1}")
            merged = len(o) > 1
            if merged != (self.kind[i] == KIND_MERGED):
                bad.append(f"kind[{i}]: {self.kind[i]!r} inconsistent with |origin|={len(o)}")
            if self.kind[i] not in TOKEN_KINDS:
                bad.append(f"kind[{i}]: unknown tag {self.kind[i]!r}")
        if len(seen) != total:
            bad.append("origin: lists are not disjoint")
        return bad


@dataclass
class ClusterAssignment:
    """Output of the density-peaks clustering stage.

    labels    (n,) int, cluster ids in 1..N_c
    centers   token indices; ``centers[c-1]`` carries label ``c``
    rho       (n,) local density
    delta     (n,) min feature distance to a denser in-range neighbor,
              sentinel-substituted for tokens with none
    gamma     (n,) rho * delta
    parent    per-token nearest denser in-range neighbor, None if absent
    """

    labels: np.ndarray
    centers: list[int]
    rho: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    parent: list[int | None]

    @property
    def n_clusters(self) -> int:
        return len(self.centers)

    def members(self, label: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.labels == label)]


@dataclass
class ModelDims:
    """LLM geometry the schedule's budgets and cost model refer to."""

    m: int
    d: int
    n_layers: int
    n_text: int = 40
    ffn_coefficient: float = 16.0   # coefficient of N*d^2 in paper-mode FFN cost

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "d": self.d,
            "n_layers": self.n_layers,
            "n_text": self.n_text,
            "ffn_coefficient": self.ffn_coefficient,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelDims":
        return cls(
            m=int(raw["m"]),
            d=int(raw["d"]),
            n_layers=int(raw["n_layers"]),
            n_text=int(raw.get("n_text", 40)),
            ffn_coefficient=float(raw.get("ffn_coefficient", 16.0)),
        )


@dataclass
class PruneSchedule:
    """Per-stage retention ratios plus the clustering and model parameters.

    pi1 >= pi2 >= pi3 are fractions of the original token count m.  Stage II
    fires at LLM layer l_s, Stage III at l_d (1-based).  alpha is the cluster
    center ratio; alpha = 1 makes every token its own center (used by the
    identity configuration pi1 = pi2 = pi3 = 1).
    """

    pi1: float
    pi2: float
    pi3: float
    l_s: int = 2
    l_d: int = 22
    d_c: float = 8.0
    tau: float = 0.6
    alpha: float = 0.125
    model: ModelDims = field(default_factory=lambda: ModelDims(576, 4096, 32))

    def stage_targets(self) -> tuple[int, int, int]:
        """(k1, B, k3): floored per-stage token targets."""
        m = self.model.m
        return (
            int(np.floor(m * self.pi1)),
            int(np.floor(m * self.pi2)),
            int(np.floor(m * self.pi3)),
        )

    def as_dict(self) -> dict:
        return {
            "pi1": self.pi1,
            "pi2": self.pi2,
            "pi3": self.pi3,
            "l_s": self.l_s,
            "l_d": self.l_d,
            "d_c": self.d_c,
            "tau": self.tau,
            "alpha": self.alpha,
            "model": self.model.as_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PruneSchedule":
        return cls(
            pi1=float(raw["pi1"]),
            pi2=float(raw["pi2"]),
            pi3=float(raw["pi3"]),
            l_s=int(raw.get("l_s", 2)),
            l_d=int(raw.get("l_d", 22)),
            d_c=float(raw.get("d_c", 8.0)),
            tau=float(raw.get("tau", 0.6)),
            alpha=float(raw.get("alpha", 0.125)),
            model=ModelDims.from_dict(raw["model"]),
        )


@dataclass
class PruneStrategy:
    """Which Stage II rule a pipeline run uses.

    ``vitcop`` is the full collaborative route; the baselines keep the same
    stage placement and budgets but replace Stage II with a plain scoring
    rule.  ``random_baseline`` must carry an explicit seed.
    """

    variant: str = "vitcop"
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.variant not in STRATEGY_VARIANTS:
            raise ValueError(f"unknown strategy variant {self.variant!r}")
        if self.variant == "random_baseline" and self.seed is None:
            raise ValueError("random_baseline requires an explicit seed")


@dataclass
class CostReport:
    """Per-layer visual-token counts and the resulting FLOPs accounting."""

    nv_per_layer: list[int]
    flops_total: float
    flops_vanilla: float
    cr_int: float
    ffn_mode: str = "paper"
    overhead_ops: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "nv_per_layer": list(self.nv_per_layer),
            "flops_total": self.flops_total,
            "flops_vanilla": self.flops_vanilla,
            "cr_int": self.cr_int,
            "ffn_mode": self.ffn_mode,
            "overhead_ops": dict(self.overhead_ops),
        }


@dataclass
class StageTrace:
    """What one pruning stage did.

    ``kept`` lists one representative original index per surviving token
    (its minimum origin member), in sequence order.
    """

    stage: str                    # "I" | "II" | "III"
    input_count: int
    output_count: int
    kept: list[int]
    kind_counts: dict[str, int]
    note: str | None = None

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "input_count": self.input_count,
            "output_count": self.output_count,
            "kept": list(self.kept),
            "kind_counts": dict(self.kind_counts),
            "note": self.note,
        }


def validate_bundle(bundle: ActivationBundle) -> list[str]:
    """Check every ActivationBundle invariant.

    Returns an empty list iff the bundle is well-formed; each violation
    names the offending field and the reason.  Pure and idempotent.
    """
    bad: list[str] = []
    meta = bundle.meta
    feats = np.asarray(bundle.token_features)
    pos = np.asarray(bundle.token_positions)
    cls = np.asarray(bundle.cls_attention)

    if feats.ndim != 2:
        bad.append(f"token_features: expected 2-D, got {feats.ndim}-D")
        return bad
    n = feats.shape[0]

    if meta.m < 1:
        bad.append(f"meta.m: must be >= 1, got {meta.m}")
    if n != meta.m:
        bad.append(f"token_features: {n} rows but meta.m = {meta.m}")
    if not np.all(np.isfinite(feats)):
        bad.append("token_features: non-finite entries")

    if pos.shape != (n, 2):
        bad.append(f"token_positions: shape {pos.shape} != ({n}, 2)")
    else:
        if not np.all(np.isfinite(pos)):
            bad.append("token_positions: non-finite entries")
        elif pos.size and (pos.min() < 0.0 or pos.max() > 1.0):
            bad.append("token_positions: coordinate outside [0, 1]")

    if cls.ndim != 2 or cls.shape != (meta.h_enc, n):
        bad.append(f"cls_attention: shape {cls.shape} != ({meta.h_enc}, {n})")
    else:
        if not np.all(np.isfinite(cls)):
            bad.append("cls_attention: non-finite entries")
        elif cls.size and cls.min() < 0.0:
            bad.append("cls_attention: negative attention weight")

    declared = set(meta.layers)
    present = set(bundle.key_vectors)
    if declared and declared != present:
        bad.append(f"key_vectors: layers {sorted(present)} != declared {sorted(declared)}")
    for layer, keys in sorted(bundle.key_vectors.items()):
        keys = np.asarray(keys)
        if keys.ndim != 3 or keys.shape[0] != meta.h_llm or keys.shape[2] != meta.d_head:
            bad.append(
                f"key_vectors[{layer}]: shape {keys.shape} != "
                f"({meta.h_llm}, n_live, {meta.d_head})"
            )
            continue
        if keys.shape[1] != n:
            bad.append(f"key_vectors[{layer}]: {keys.shape[1]} tokens but bundle has {n}")
        if not np.all(np.isfinite(keys)):
            bad.append(f"key_vectors[{layer}]: non-finite entries")
        if not (1 <= layer <= meta.n_layers):
            bad.append(f"key_vectors[{layer}]: layer outside 1..{meta.n_layers}")

    for layer, att in sorted(bundle.text_attention.items()):
        att = np.asarray(att)
        if att.shape != (meta.h_llm, n):
            bad.append(f"text_attention[{layer}]: shape {att.shape} != ({meta.h_llm}, {n})")
        elif not np.all(np.isfinite(att)):
            bad.append(f"text_attention[{layer}]: non-finite entries")
        elif att.size and att.min() < 0.0:
            bad.append(f"text_attention[{layer}]: negative attention weight")

    return bad
