"""Collaborative pruning: per-cluster quotas, elite keeps, remainder merge.

Each cluster keeps its q_c lowest-key-norm members verbatim ("elites") and
compresses whatever is left into one merged token, the unweighted mean of
the remaining feature vectors.  Quotas are proportional to cluster size,
q_c = floor(|C_c| / n * (B - N_c)); the floor's leftover budget is handed
out one slot at a time by largest fractional remainder (ties to the lower
cluster id), skipping clusters that are already fully elite.  Remainders
are compared in exact integer arithmetic (|C_c| * B_elites mod n), so the
allocation is deterministic and immune to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .saliency import ScoreVector
from .types import KIND_ELITE, KIND_KEPT, KIND_MERGED, ClusterAssignment, TokenSet


@dataclass
class QuotaPlan:
    """Per-cluster elite quotas for a Stage II budget."""

    quotas: list[int]
    budget: int                 # B
    elite_budget: int           # B - N_c
    remainder_grants: list[int]   # cluster ids (0-based) that received +1

    @property
    def total(self) -> int:
        return sum(self.quotas)


def allocate_quotas(cluster_sizes: list[int], budget: int) -> QuotaPlan:
    """Split the elite budget B - N_c across clusters by relative size.

    Final quotas sum to min(B - N_c, n) and never exceed a cluster's size.
    """
    n_clusters = len(cluster_sizes)
    if n_clusters < 1:
        raise ValueError("need at least one cluster")
    if any(s < 1 for s in cluster_sizes):
        raise ValueError("cluster sizes must be positive")
    if budget <= n_clusters:
        raise ValueError(
            f"budget cannot cover one merged token per cluster: "
            f"B={budget} <= N_c={n_clusters}"
        )
    n = sum(cluster_sizes)
    elite_budget = budget - n_clusters

    quotas = [min(s * elite_budget // n, s) for s in cluster_sizes]
    remainders = [s * elite_budget % n for s in cluster_sizes]
    grant_order = sorted(range(n_clusters), key=lambda c: (-remainders[c], c))

    grants: list[int] = []
    leftover = min(elite_budget, n) - sum(quotas)
    while leftover > 0:
        progressed = False
        for c in grant_order:
            if leftover == 0:
                break
            if quotas[c] < cluster_sizes[c]:
                quotas[c] += 1
                grants.append(c)
                leftover -= 1
                progressed = True
        if not progressed:   # every cluster fully elite
            break

    return QuotaPlan(
        quotas=quotas,
        budget=budget,
        elite_budget=elite_budget,
        remainder_grants=grants,
    )


def select_elites(member_indices: list[int], k_norms: ScoreVector, q: int) -> list[int]:
    """The q members with the smallest key norm, ascending by index.

    Norm ties go to the lower original index.
    """
    if q < 0:
        raise ValueError(f"quota must be nonnegative, got {q}")
    if q > len(member_indices):
        raise ValueError(f"quota {q} exceeds cluster size {len(member_indices)}")
    values = k_norms.values
    best = sorted(member_indices, key=lambda i: (values[i], i))[:q]
    return sorted(best)


def merge_remaining(features: np.ndarray) -> np.ndarray:
    """Component-wise mean of the remaining members' feature vectors."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise ValueError("need at least one remaining feature vector")
    return feats.mean(axis=0)


def coprune(
    tokens: TokenSet,
    assignment: ClusterAssignment,
    k_norms: ScoreVector,
    budget: int,
) -> TokenSet:
    """Apply quota allocation, elite selection, and merging to a token set.

    Output order is ascending by each token's minimum original index, so
    the surviving sequence stays positionally coherent.  Every input token
    ends up either elite or inside exactly one merged token.
    """
    k = len(tokens)
    if assignment.labels.shape[0] != k or len(k_norms) != k:
        raise ValueError("assignment/scores do not cover the token set")

    n_clusters = assignment.n_clusters
    members_by_cluster = [assignment.members(label) for label in range(1, n_clusters + 1)]
    plan = allocate_quotas([len(ms) for ms in members_by_cluster], budget)

    entries: list[tuple[int, np.ndarray, np.ndarray, tuple[int, ...], str]] = []
    for members, quota in zip(members_by_cluster, plan.quotas):
        elites = select_elites(members, k_norms, quota)
        elite_set = set(elites)
        for i in elites:
            entries.append(
                (
                    min(tokens.origin[i]),
                    tokens.features[i],
                    tokens.positions[i],
                    tokens.origin[i],
                    KIND_ELITE,
                )
            )
        remaining = [i for i in members if i not in elite_set]
        if remaining:
            # A remainder of one is carried verbatim: it was neither selected
            # by norm nor actually merged, so it keeps the plain tag.
            origin = tuple(sorted(j for i in remaining for j in tokens.origin[i]))
            entries.append(
                (
                    origin[0],
                    merge_remaining(tokens.features[remaining]),
                    tokens.positions[remaining].mean(axis=0),
                    origin,
                    KIND_MERGED if len(origin) > 1 else KIND_KEPT,
                )
            )

    entries.sort(key=lambda e: e[0])
    return TokenSet(
        features=np.array([e[1] for e in entries], dtype=np.float64),
        positions=np.array([e[2] for e in entries], dtype=np.float64),
        origin=[e[3] for e in entries],
        kind=[e[4] for e in entries],
    )
