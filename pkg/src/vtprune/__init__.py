"""Offline visual-token pruning engine.

Operates on activation bundles dumped from vision-language models: a
three-stage pruning pipeline (encoder saliency top-k, density-peaks
co-pruning with key-norm elites and remainder merging, deep-layer key-norm
top-k), baseline strategies, an analytical transformer FLOPs model, and a
bit-exact bundle file format.
"""

__version__ = "0.1.0"

from .bundleio import (
    BundleFormatError,
    BundleManifest,
    load_bundle,
    load_token_set,
    read_manifest,
    save_bundle,
    save_token_set,
)
from .clustering import DistancePair, cluster, delta_and_parent, local_density, pairwise_distances
from .copruning import QuotaPlan, allocate_quotas, coprune, merge_remaining, select_elites
from .costmodel import (
    FlopsConfig,
    cost_report,
    flops_layer,
    integrated_compression_ratio,
    nv_at_layer,
    total_flops,
    vanilla_flops,
)
from .pipeline import run_pipeline, run_stage1, run_stage2, run_stage3
from .saliency import (
    LARGER_IS_BETTER,
    SMALLER_IS_BETTER,
    ScoreVector,
    cls_saliency,
    key_l2_norm,
    select_top_k,
)
from .schedules import load_schedule, preset, save_schedule, scaled_placement, validate_schedule
from .types import (
    ActivationBundle,
    BundleMeta,
    ClusterAssignment,
    CostReport,
    ModelDims,
    PruneSchedule,
    PruneStrategy,
    StageTrace,
    TokenSet,
    validate_bundle,
)

__all__ = [
    "ActivationBundle",
    "BundleFormatError",
    "BundleManifest",
    "BundleMeta",
    "ClusterAssignment",
    "CostReport",
    "DistancePair",
    "FlopsConfig",
    "LARGER_IS_BETTER",
    "ModelDims",
    "PruneSchedule",
    "PruneStrategy",
    "QuotaPlan",
    "SMALLER_IS_BETTER",
    "ScoreVector",
    "StageTrace",
    "TokenSet",
    "allocate_quotas",
    "cls_saliency",
    "cluster",
    "coprune",
    "cost_report",
    "delta_and_parent",
    "flops_layer",
    "integrated_compression_ratio",
    "key_l2_norm",
    "load_bundle",
    "load_schedule",
    "load_token_set",
    "local_density",
    "merge_remaining",
    "nv_at_layer",
    "pairwise_distances",
    "preset",
    "read_manifest",
    "run_pipeline",
    "run_stage1",
    "run_stage2",
    "run_stage3",
    "save_bundle",
    "save_schedule",
    "save_token_set",
    "scaled_placement",
    "select_elites",
    "select_top_k",
    "total_flops",
    "validate_bundle",
    "validate_schedule",
    "vanilla_flops",
]
