"""Brute-force reference implementations and equivalence suites.

Everything here re-derives results with plain Python loops, straight from
the published pseudocode plus the engine's documented tie-break
conventions, and deliberately shares no code path with the vectorized
implementations it checks.  The ``oracle-check`` CLI subcommand and the
acceptance tests both run these suites on seeded random instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import clustering, copruning, saliency
from .types import KIND_KEPT, ClusterAssignment, TokenSet

# ---------------------------------------------------------------------------
# reference implementations


def saliency_reference(cls_attention: np.ndarray) -> list[float]:
    """Per-token attention sum via explicit elementwise loops."""
    heads, n = cls_attention.shape
    out = []
    for i in range(n):
        total = 0.0
        for h in range(heads):
            total += float(cls_attention[h][i])
        out.append(total)
    return out


def key_norm_reference(key_vectors: np.ndarray) -> list[float]:
    """Norm of each token's concatenated per-head keys, accumulated scalar
    by scalar."""
    heads, n, d_head = key_vectors.shape
    out = []
    for i in range(n):
        sq = 0.0
        for h in range(heads):
            for k in range(d_head):
                v = float(key_vectors[h][i][k])
                sq += v * v
        out.append(math.sqrt(sq))
    return out


def top_k_reference(values: list[float], direction: str, k: int) -> list[int]:
    """Full sort, prefix, re-sort ascending."""
    if direction == saliency.LARGER_IS_BETTER:
        ranked = sorted(range(len(values)), key=lambda i: (-values[i], i))
    else:
        ranked = sorted(range(len(values)), key=lambda i: (values[i], i))
    return sorted(ranked[:k])


def pairwise_reference(points: np.ndarray) -> list[list[float]]:
    """Double-loop Euclidean distances."""
    n, dim = points.shape
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            sq = 0.0
            for k in range(dim):
                diff = float(points[i][k]) - float(points[j][k])
                sq += diff * diff
            out[i][j] = math.sqrt(sq)
    return out


def density_reference(feature_distances: np.ndarray, d_c: float) -> list[float]:
    """Literal Gaussian-kernel density sum."""
    n = feature_distances.shape[0]
    out = []
    for i in range(n):
        rho = 0.0
        for j in range(n):
            if j != i:
                ratio = float(feature_distances[i][j]) / d_c
                rho += math.exp(-(ratio * ratio))
        out.append(rho)
    return out


@dataclass
class VicReference:
    labels: list[int]
    centers: list[int]
    rho: list[float]
    delta: list[float]
    parent: list[int | None]


def vic_reference(
    features: np.ndarray,
    positions: np.ndarray,
    d_c: float,
    tau: float,
    alpha: float,
) -> VicReference:
    """Clustering re-derived step by step with scalar loops.

    Pairwise distances are the one shared numeric convention (the distance
    primitive has its own dedicated double-loop check); density, delta,
    center ranking and label assignment are all re-implemented here.
    """
    n = features.shape[0]
    dfeat = np.asarray(
        [[_row_distance(features[i], features[j]) for j in range(n)] for i in range(n)]
    )
    dspat = [[_row_distance(positions[i], positions[j]) for j in range(n)] for i in range(n)]

    rho = density_reference(dfeat, d_c)

    sentinel = 0.0
    for i in range(n):
        for j in range(n):
            sentinel = max(sentinel, float(dfeat[i][j]))

    delta = [sentinel] * n
    parent: list[int | None] = [None] * n
    for i in range(n):
        best = math.inf
        best_j: int | None = None
        for j in range(n):
            if j == i:
                continue
            denser = rho[j] > rho[i] or (rho[j] == rho[i] and j < i)
            if denser and dspat[i][j] <= tau:
                if float(dfeat[i][j]) < best:
                    best = float(dfeat[i][j])
                    best_j = j
        if best_j is not None:
            delta[i] = best
            parent[i] = best_j

    gamma = [rho[i] * delta[i] for i in range(n)]
    n_centers = math.ceil(n * alpha)
    ranked = sorted(range(n), key=lambda i: (-gamma[i], -rho[i], i))
    centers = ranked[:n_centers]

    labels = [0] * n
    for rank, c in enumerate(centers, start=1):
        labels[c] = rank
    for i in sorted(range(n), key=lambda i: (-rho[i], i)):
        if labels[i] != 0:
            continue
        p = parent[i]
        if p is not None:
            labels[i] = labels[p]
        else:
            best = math.inf
            best_label = 0
            for rank, c in enumerate(centers, start=1):
                if float(dfeat[i][c]) < best:
                    best = float(dfeat[i][c])
                    best_label = rank
            labels[i] = best_label

    return VicReference(labels=labels, centers=centers, rho=rho, delta=delta, parent=parent)


def _row_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt((diff * diff).sum()))


def quota_reference(cluster_sizes: list[int], budget: int) -> list[int]:
    """Largest-remainder quota split, re-derived with explicit bookkeeping."""
    n_clusters = len(cluster_sizes)
    n = sum(cluster_sizes)
    elite_budget = budget - n_clusters
    if elite_budget <= 0:
        raise ValueError("budget does not exceed cluster count")

    quotas = []
    remainders = []
    for size in cluster_sizes:
        exact_num = size * elite_budget
        quotas.append(min(exact_num // n, size))
        remainders.append(exact_num % n)

    order = sorted(range(n_clusters), key=lambda c: (-remainders[c], c))
    want = min(elite_budget, n) - sum(quotas)
    while want > 0:
        granted = False
        for c in order:
            if want == 0:
                break
            if quotas[c] < cluster_sizes[c]:
                quotas[c] += 1
                want -= 1
                granted = True
        if not granted:
            break
    return quotas


@dataclass
class CopruneReferenceToken:
    origin: tuple[int, ...]
    kind: str
    features: list[float]


def coprune_reference(
    features: np.ndarray,
    origins: list[tuple[int, ...]],
    labels: list[int],
    k_norm_values: list[float],
    budget: int,
) -> list[CopruneReferenceToken]:
    """Per-cluster elite keep + remainder merge, scalar arithmetic only."""
    n_clusters = max(labels)
    clusters = [[i for i in range(len(labels)) if labels[i] == c] for c in range(1, n_clusters + 1)]
    quotas = quota_reference([len(c) for c in clusters], budget)

    out: list[CopruneReferenceToken] = []
    for members, quota in zip(clusters, quotas):
        ranked = sorted(members, key=lambda i: (k_norm_values[i], i))
        elites = sorted(ranked[:quota])
        for i in elites:
            out.append(
                CopruneReferenceToken(
                    origin=origins[i],
                    kind="elite",
                    features=[float(v) for v in features[i]],
                )
            )
        remaining = [i for i in members if i not in elites]
        if remaining:
            dim = features.shape[1]
            mean = []
            for k in range(dim):
                total = 0.0
                for i in remaining:
                    total += float(features[i][k])
                mean.append(total / len(remaining))
            origin = tuple(sorted(j for i in remaining for j in origins[i]))
            out.append(
                CopruneReferenceToken(
                    origin=origin,
                    kind="merged" if len(origin) > 1 else "kept",
                    features=mean,
                )
            )
    out.sort(key=lambda t: min(t.origin))
    return out


# ---------------------------------------------------------------------------
# random instances


def random_cluster_instance(rng: np.random.Generator, max_n: int = 64) -> dict:
    """One clustering problem: tokens, positions, and the three parameters.

    Mixes diffuse and blob-structured feature layouts so both the spatial
    gate and the density ranking get exercised.
    """
    n = int(rng.integers(2, max_n + 1))
    d_feat = int(rng.integers(2, 33))
    if rng.random() < 0.5:
        features = rng.normal(0.0, rng.uniform(0.5, 4.0), size=(n, d_feat))
    else:
        n_blobs = int(rng.integers(2, 5))
        centers = rng.normal(0.0, 6.0, size=(n_blobs, d_feat))
        which = rng.integers(0, n_blobs, size=n)
        features = centers[which] + rng.normal(0.0, 0.8, size=(n, d_feat))
    positions = rng.uniform(0.0, 1.0, size=(n, 2))
    return {
        "features": features,
        "positions": positions,
        "d_c": float(rng.uniform(0.5, 12.0)),
        "tau": float(rng.uniform(0.05, 1.5)),
        "alpha": float(rng.uniform(0.05, 1.0)),
    }


def random_coprune_instance(rng: np.random.Generator, max_n: int = 64) -> dict:
    """One co-pruning problem with a guaranteed-nonempty label partition."""
    n = int(rng.integers(2, max_n + 1))
    d_feat = int(rng.integers(2, 17))
    n_clusters = int(rng.integers(1, n + 1))
    labels = list(range(1, n_clusters + 1)) + [
        int(rng.integers(1, n_clusters + 1)) for _ in range(n - n_clusters)
    ]
    rng.shuffle(labels)
    upper = n + 4   # beyond n so the all-elite branch gets hit
    budget = int(rng.integers(n_clusters + 1, max(n_clusters + 2, upper)))
    return {
        "features": rng.normal(0.0, 2.0, size=(n, d_feat)),
        "labels": labels,
        "k_norms": rng.uniform(0.1, 5.0, size=n),
        "budget": budget,
        "n_clusters": n_clusters,
    }


def token_set_from_instance(inst: dict) -> TokenSet:
    n = inst["features"].shape[0]
    return TokenSet(
        features=np.asarray(inst["features"], dtype=np.float64),
        positions=np.zeros((n, 2), dtype=np.float64),
        origin=[(i,) for i in range(n)],
        kind=[KIND_KEPT] * n,
    )


# ---------------------------------------------------------------------------
# equivalence suites


@dataclass
class SuiteResult:
    name: str
    trials: int
    mismatches: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def run_saliency_suite(seed: int, trials: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for _ in range(trials):
        heads = int(rng.integers(1, 9))
        n = int(rng.integers(1, 33))
        att = rng.uniform(0.0, 1.0, size=(heads, n))
        got = saliency.cls_saliency(att).values
        want = saliency_reference(att)
        if not np.allclose(got, want, rtol=1e-12, atol=0.0):
            bad += 1
            detail = detail or f"heads={heads} n={n}"
    return SuiteResult("cls-saliency", trials, bad, detail)


def run_key_norm_suite(seed: int, trials: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for _ in range(trials):
        heads = int(rng.integers(1, 9))
        n = int(rng.integers(1, 33))
        d_head = int(rng.integers(1, 17))
        keys = rng.normal(0.0, 2.0, size=(heads, n, d_head))
        got = saliency.key_l2_norm(keys).values
        want = np.asarray(key_norm_reference(keys))
        if not np.allclose(got, want, rtol=1e-9, atol=0.0):
            bad += 1
            detail = detail or f"heads={heads} n={n} d_head={d_head}"
    return SuiteResult("key-norm", trials, bad, detail)


def run_top_k_suite(seed: int, trials: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for _ in range(trials):
        n = int(rng.integers(1, 65))
        values = rng.normal(0.0, 1.0, size=n)
        if rng.random() < 0.3:   # force ties
            values = np.round(values, 1)
        direction = (
            saliency.LARGER_IS_BETTER if rng.random() < 0.5 else saliency.SMALLER_IS_BETTER
        )
        k = int(rng.integers(1, n + 1))
        got = saliency.select_top_k(saliency.ScoreVector(values, direction), k)
        want = top_k_reference([float(v) for v in values], direction, k)
        if got != want:
            bad += 1
            detail = detail or f"n={n} k={k} {direction}"
    return SuiteResult("top-k", trials, bad, detail)


def run_pairwise_suite(seed: int, trials: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for _ in range(trials):
        n = int(rng.integers(1, 33))
        d = int(rng.integers(1, 17))
        feats = rng.normal(0.0, 3.0, size=(n, d))
        pos = rng.uniform(0.0, 1.0, size=(n, 2))
        pair = clustering.pairwise_distances(feats, pos)
        if not np.allclose(
            pair.feature_distances, np.asarray(pairwise_reference(feats)), rtol=1e-9, atol=1e-12
        ) or not np.allclose(
            pair.spatial_distances, np.asarray(pairwise_reference(pos)), rtol=1e-9, atol=1e-12
        ):
            bad += 1
            detail = detail or f"n={n} d={d}"
    return SuiteResult("pairwise-distance", trials, bad, detail)


def run_density_suite(seed: int, trials: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for _ in range(trials):
        n = int(rng.integers(2, 33))
        d = int(rng.integers(2, 17))
        feats = rng.normal(0.0, 3.0, size=(n, d))
        d_c = float(rng.uniform(0.5, 12.0))
        dfeat = clustering.pairwise_distances(feats, np.zeros((n, 2))).feature_distances
        got = clustering.local_density(dfeat, d_c)
        want = np.asarray(density_reference(dfeat, d_c))
        if not np.allclose(got, want, rtol=1e-9, atol=1e-15):
            bad += 1
            detail = detail or f"n={n} d_c={d_c:.3f}"
    return SuiteResult("local-density", trials, bad, detail)


def run_vic_suite(seed: int, trials: int, max_n: int = 64) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for t in range(trials):
        inst = random_cluster_instance(rng, max_n=max_n)
        got = clustering.cluster(
            inst["features"], inst["positions"], inst["d_c"], inst["tau"], inst["alpha"]
        )
        want = vic_reference(
            inst["features"], inst["positions"], inst["d_c"], inst["tau"], inst["alpha"]
        )
        if got.labels.tolist() != want.labels or got.centers != want.centers:
            bad += 1
            detail = detail or f"trial={t} n={inst['features'].shape[0]}"
    return SuiteResult("vic-cluster", trials, bad, detail)


def run_quota_suite(seed: int, trials: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for _ in range(trials):
        n_clusters = int(rng.integers(1, 13))
        sizes = [int(rng.integers(1, 17)) for _ in range(n_clusters)]
        budget = int(rng.integers(n_clusters + 1, sum(sizes) + n_clusters + 4))
        got = copruning.allocate_quotas(sizes, budget).quotas
        want = quota_reference(sizes, budget)
        if got != want:
            bad += 1
            detail = detail or f"sizes={sizes} B={budget}"
    return SuiteResult("quota-allocation", trials, bad, detail)


def run_coprune_suite(seed: int, trials: int, max_n: int = 64) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    detail = ""
    for t in range(trials):
        inst = random_coprune_instance(rng, max_n=max_n)
        tokens = token_set_from_instance(inst)
        assignment = _assignment_from_labels(inst["labels"], tokens)
        scores = saliency.ScoreVector(inst["k_norms"], saliency.SMALLER_IS_BETTER)
        got = copruning.coprune(tokens, assignment, scores, inst["budget"])
        want = coprune_reference(
            tokens.features,
            tokens.origin,
            inst["labels"],
            [float(v) for v in inst["k_norms"]],
            inst["budget"],
        )
        if not _coprune_outputs_equal(got, want):
            bad += 1
            detail = detail or f"trial={t} n={len(tokens)} B={inst['budget']}"
    return SuiteResult("coprune", trials, bad, detail)


def _assignment_from_labels(labels: list[int], tokens: TokenSet) -> ClusterAssignment:
    n = len(labels)
    n_clusters = max(labels)
    centers = []
    for c in range(1, n_clusters + 1):
        centers.append(labels.index(c))
    return ClusterAssignment(
        labels=np.asarray(labels, dtype=np.int64),
        centers=centers,
        rho=np.zeros(n),
        delta=np.zeros(n),
        gamma=np.zeros(n),
        parent=[None] * n,
    )


def _coprune_outputs_equal(got: TokenSet, want: list[CopruneReferenceToken]) -> bool:
    if len(got) != len(want):
        return False
    for i, ref in enumerate(want):
        if got.origin[i] != ref.origin or got.kind[i] != ref.kind:
            return False
        if not np.allclose(got.features[i], np.asarray(ref.features), rtol=1e-9, atol=1e-12):
            return False
    return True


ALL_SUITES = (
    run_saliency_suite,
    run_key_norm_suite,
    run_top_k_suite,
    run_pairwise_suite,
    run_density_suite,
    run_vic_suite,
    run_quota_suite,
    run_coprune_suite,
)


def run_all_suites(seed: int, trials: int, max_n: int = 64) -> list[SuiteResult]:
    """Run every equivalence suite with per-suite derived seeds."""
    results = []
    for offset, suite in enumerate(ALL_SUITES):
        if suite in (run_vic_suite, run_coprune_suite):
            results.append(suite(seed + offset, trials, max_n=max_n))
        else:
            results.append(suite(seed + offset, trials))
    return results
