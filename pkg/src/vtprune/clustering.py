"""Density-peaks clustering with a spatial gate.

Local density uses a Gaussian kernel over feature distances.  Each token's
delta is the minimum feature distance to a *denser* token that is also
within the spatial threshold tau; tokens with no such neighbor (at least the
global density maximum) receive a finite sentinel delta, the maximum
pairwise feature distance, so that gamma = rho * delta stays comparable
across all tokens.  Cluster centers are the top-gamma tokens; every other
token inherits the label of its nearest denser in-range neighbor, walking
tokens in descending-density order so one pass suffices.  Tokens whose
neighbor search came up empty (the spatial gate can isolate them) fall back
to the nearest center by feature distance.

Determinism conventions, applied identically in the reference oracle:

* exact density ties treat the lower index as denser, which keeps the
  parent relation acyclic;
* center ranking sorts by (gamma desc, rho desc, index asc);
* argmin ties (parent search, center fallback) go to the lowest index /
  first center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import ClusterAssignment


@dataclass
class DistancePair:
    """Euclidean pairwise distances over features and over positions."""

    feature_distances: np.ndarray   # (n, n)
    spatial_distances: np.ndarray   # (n, n)


def pairwise_distances(features: np.ndarray, positions: np.ndarray) -> DistancePair:
    """Full Euclidean distance matrices for features and positions."""
    feats = np.asarray(features, dtype=np.float64)
    pos = np.asarray(positions, dtype=np.float64)
    if feats.ndim != 2 or pos.ndim != 2:
        raise ValueError("features and positions must be 2-D")
    if feats.shape[0] != pos.shape[0]:
        raise ValueError("features and positions disagree on token count")
    return DistancePair(_euclidean_matrix(feats), _euclidean_matrix(pos))


def _euclidean_matrix(x: np.ndarray) -> np.ndarray:
    # Row-wise expansion keeps memory at O(n*d) and is exactly symmetric:
    # (a-b)^2 == (b-a)^2 and the feature-axis summation order is fixed.
    n = x.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        diff = x - x[i]
        out[i] = np.sqrt((diff * diff).sum(axis=1))
        out[i, i] = 0.0
    return out


def local_density(feature_distances: np.ndarray, d_c: float) -> np.ndarray:
    """Gaussian-kernel density: rho_i = sum_{j != i} exp(-(d_ij / d_c)^2)."""
    if d_c <= 0:
        raise ValueError(f"cutoff distance must be positive, got {d_c}")
    d = np.asarray(feature_distances, dtype=np.float64)
    kernel = np.exp(-np.square(d / d_c))
    np.fill_diagonal(kernel, 0.0)
    return kernel.sum(axis=1)


def _denser_mask(rho: np.ndarray, i: int) -> np.ndarray:
    idx = np.arange(rho.shape[0])
    return (rho > rho[i]) | ((rho == rho[i]) & (idx < i))


def delta_and_parent(
    rho: np.ndarray,
    feature_distances: np.ndarray,
    spatial_distances: np.ndarray,
    tau: float,
) -> tuple[np.ndarray, list[int | None]]:
    """Min feature distance to a denser token within spatial range tau.

    Returns (delta, parent).  parent[i] is None when no denser token lies
    within tau of token i; its delta is then the sentinel (max pairwise
    feature distance).
    """
    if tau <= 0:
        raise ValueError(f"spatial threshold must be positive, got {tau}")
    rho = np.asarray(rho, dtype=np.float64)
    dfeat = np.asarray(feature_distances, dtype=np.float64)
    dspat = np.asarray(spatial_distances, dtype=np.float64)
    n = rho.shape[0]
    sentinel = float(dfeat.max()) if n else 0.0

    delta = np.full(n, sentinel, dtype=np.float64)
    parent: list[int | None] = [None] * n
    for i in range(n):
        mask = _denser_mask(rho, i) & (dspat[i] <= tau)
        cand = np.flatnonzero(mask)
        if cand.size:
            j = int(cand[np.argmin(dfeat[i, cand])])
            delta[i] = dfeat[i, j]
            parent[i] = j
    return delta, parent


def cluster(
    features: np.ndarray,
    positions: np.ndarray,
    d_c: float,
    tau: float,
    alpha: float,
) -> ClusterAssignment:
    """Run the full clustering pass and label every token.

    ceil(n * alpha) centers are chosen by largest gamma; labels are cluster
    ids 1..N_c, with centers[c-1] owning label c.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"center ratio must be in (0, 1], got {alpha}")
    dists = pairwise_distances(features, positions)
    n = dists.feature_distances.shape[0]
    if n < 1:
        raise ValueError("no tokens to cluster")

    rho = local_density(dists.feature_distances, d_c)
    delta, parent = delta_and_parent(
        rho, dists.feature_distances, dists.spatial_distances, tau
    )
    gamma = rho * delta

    n_centers = int(np.ceil(n * alpha))
    order = np.lexsort((np.arange(n), -rho, -gamma))
    centers = [int(i) for i in order[:n_centers]]

    labels = np.zeros(n, dtype=np.int64)
    for rank, c in enumerate(centers, start=1):
        labels[c] = rank

    by_density = np.lexsort((np.arange(n), -rho))
    center_arr = np.asarray(centers, dtype=np.int64)
    for i in by_density:
        if labels[i] != 0:
            continue
        p = parent[i]
        if p is not None:
            labels[i] = labels[p]
        else:
            # Spatially isolated non-center: adopt the nearest center.
            labels[i] = 1 + int(np.argmin(dists.feature_distances[i, center_arr]))

    return ClusterAssignment(
        labels=labels,
        centers=centers,
        rho=rho,
        delta=delta,
        gamma=gamma,
        parent=parent,
    )
