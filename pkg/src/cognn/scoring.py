"""Ranking agreement between learned collaborative weights and a 0/1 truth graph."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .core import DimensionError


def symmetrize(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    return 0.5 * (w + w.T)


def _offdiag_upper(a: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(a.shape[0], k=1)
    return a[iu]


def edge_auc(weights: np.ndarray, truth: np.ndarray) -> float:
    """AUC of symmetrized weights as an edge score; ties count one half.

    Each unordered pair is scored once. NaN when the truth has no edges or no
    non-edges.
    """
    weights = np.asarray(weights, dtype=np.float64)
    truth = np.asarray(truth)
    if weights.shape != truth.shape or weights.ndim != 2:
        raise DimensionError(f"weights {weights.shape} and truth {truth.shape} are not aligned")
    scores = _offdiag_upper(symmetrize(weights))
    labels = _offdiag_upper(truth) > 0
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)  # average ranks resolve ties to 1/2
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def topk_precision(weights: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of true edges among the k highest-scoring pairs, k = true edge count."""
    scores = _offdiag_upper(symmetrize(weights))
    labels = _offdiag_upper(np.asarray(truth)) > 0
    k = int(labels.sum())
    if k == 0:
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    return float(labels[order[:k]].mean())
