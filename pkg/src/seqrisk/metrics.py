"""Multi-label evaluation metrics over score/label matrices.

All functions take scores (N, L) and binary labels (N, L). Accumulation is
sequential in sample-major order so results are reproducible bit-for-bit
against straightforward reference implementations.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

PROB_EPS = 1e-12


def nll(scores: np.ndarray, labels: np.ndarray) -> float:
    """Unweighted mean per-label binary cross-entropy."""
    n, ell = scores.shape
    total = 0.0
    for i in range(n):
        for j in range(ell):
            p = min(max(float(scores[i, j]), PROB_EPS), 1.0 - PROB_EPS)
            if labels[i, j]:
                total += -math.log(p)
            else:
                total += -math.log(1.0 - p)
    return total / (n * ell)


def auc_binary(scores: Sequence[float], labels: Sequence[int]) -> float | None:
    """Rank-based (Mann-Whitney) AUC; None when one class is missing.

    Uses midranks, which equals the pairwise count with half credit for
    ties exactly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_per_target(scores: np.ndarray, labels: np.ndarray) -> list[float | None]:
    return [auc_binary(scores[:, j], labels[:, j]) for j in range(scores.shape[1])]


def macro_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Macro-average AUC; single-class targets are excluded with a warning."""
    values = auc_per_target(scores, labels)
    defined = [v for v in values if v is not None]
    skipped = sum(1 for v in values if v is None)
    if skipped:
        logger.warning("macro AUC: %d target(s) without both classes excluded", skipped)
    if not defined:
        return None
    total = 0.0
    for v in defined:
        total += v
    return total / len(defined)


def precision_micro(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    """Micro-averaged precision; predicted positive means score >= threshold."""
    tp = 0
    predicted = 0
    n, ell = scores.shape
    for i in range(n):
        for j in range(ell):
            if scores[i, j] >= threshold:
                predicted += 1
                if labels[i, j]:
                    tp += 1
    if predicted == 0:
        return 0.0
    return tp / predicted


def recall_at_k(scores: np.ndarray, labels: np.ndarray, k: int) -> float | None:
    """Mean over labeled samples of |true & top-k| / min(|true|, k).

    Ties in the top-k cut break by target index; samples without any true
    label are skipped (the ratio is undefined for them).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n, ell = scores.shape
    total = 0.0
    counted = 0
    for i in range(n):
        true = {j for j in range(ell) if labels[i, j]}
        if not true:
            continue
        top = sorted(range(ell), key=lambda j: (-scores[i, j], j))[:k]
        hits = sum(1 for j in top if j in true)
        total += hits / min(len(true), k)
        counted += 1
    if counted == 0:
        return None
    return total / counted


def bootstrap_std(metric: Callable[[np.ndarray, np.ndarray], float | None],
                  scores: np.ndarray, labels: np.ndarray,
                  n_resamples: int = 100, seed: int = 0) -> float | None:
    """Std of a metric over bootstrap resamples of the sample axis."""
    rng = np.random.default_rng(seed)
    n = scores.shape[0]
    values = []
    for _ in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        value = metric(scores[idx], labels[idx])
        if value is not None:
            values.append(value)
    if len(values) < 2:
        return None
    return float(np.std(values, ddof=1))
