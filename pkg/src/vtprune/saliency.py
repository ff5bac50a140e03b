"""Scoring primitives: CLS-attention saliency, key-vector norms, top-k.

All three are pure functions.  Selection is deterministic: score ties are
broken by the lower original index, and selected indices are emitted in
ascending order so surviving tokens keep their original sequence order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LARGER_IS_BETTER = "larger-is-better"
SMALLER_IS_BETTER = "smaller-is-better"


@dataclass
class ScoreVector:
    """Per-token scores plus the direction in which they rank tokens."""

    values: np.ndarray
    direction: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.direction not in (LARGER_IS_BETTER, SMALLER_IS_BETTER):
            raise ValueError(f"unknown score direction {self.direction!r}")
        if self.values.ndim != 1:
            raise ValueError("scores must be a 1-D vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scores must be finite")

    def __len__(self) -> int:
        return int(self.values.shape[0])


def cls_saliency(cls_attention: np.ndarray) -> ScoreVector:
    """Sum attention from the [CLS] token over encoder heads, per token.

    Input is (H_enc, n) with nonnegative softmax weights; the score of token
    i is the raw sum over heads (no normalization by head count).
    """
    att = np.asarray(cls_attention, dtype=np.float64)
    if att.ndim != 2:
        raise ValueError("cls_attention must be a 2-D (heads, tokens) matrix")
    if att.shape[1] == 0:
        raise ValueError("no tokens")
    if att.shape[0] == 0:
        raise ValueError("no attention heads")
    if att.min() < 0.0:
        raise ValueError("cls_attention must be nonnegative")
    return ScoreVector(att.sum(axis=0), LARGER_IS_BETTER)


def key_l2_norm(key_vectors: np.ndarray) -> ScoreVector:
    """Per-token L2 norm of the concatenated per-head key vectors.

    Input is (H_llm, n, d_head).  The score of token i is
    sqrt(sum_h ||K_i^(h)||^2), i.e. the norm of the length H*d_head
    concatenation.  Smaller norm ranks better.
    """
    keys = np.asarray(key_vectors, dtype=np.float64)
    if keys.ndim != 3:
        raise ValueError("key_vectors must be a 3-D (heads, tokens, d_head) tensor")
    h, n, d_head = keys.shape
    if n == 0:
        raise ValueError("no tokens")
    if h == 0:
        raise ValueError("no attention heads")
    if d_head == 0:
        raise ValueError("zero-length head dimension")
    return ScoreVector(np.sqrt((keys * keys).sum(axis=(0, 2))), SMALLER_IS_BETTER)


def select_top_k(scores: ScoreVector, k: int) -> list[int]:
    """Indices of the k best-scoring tokens, ascending.

    Ties go to the lower original index.  The ascending output order keeps
    the downstream sequence in original token order.
    """
    n = len(scores)
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k > n:
        raise ValueError(f"budget exceeds population: k={k} > n={n}")
    keyed = scores.values if scores.direction == SMALLER_IS_BETTER else -scores.values
    best = np.argsort(keyed, kind="stable")[:k]
    return sorted(int(i) for i in best)
