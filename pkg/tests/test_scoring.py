import numpy as np
import pytest

from cognn.core import DimensionError, normalize_rows
from cognn.scoring import edge_auc, symmetrize, topk_precision

from .oracles import brute_auc


def _graph(n, p, seed):
    rng = np.random.default_rng(seed)
    up = np.triu(rng.random((n, n)) < p, 1)
    return (up | up.T).astype(float)


def test_perfect_ranking():
    truth = _graph(8, 0.3, 0)
    learned = normalize_rows(truth + np.eye(8) + 1e-3)
    assert edge_auc(learned, truth) == 1.0
    assert topk_precision(learned, truth) == 1.0


def test_uniform_scores_half():
    truth = _graph(8, 0.3, 1)
    assert edge_auc(np.full((8, 8), 1 / 8), truth) == 0.5


@pytest.mark.parametrize("seed", range(5))
def test_matches_pairwise_count(seed):
    truth = _graph(5, 0.5, seed + 10)
    if truth[np.triu_indices(5, 1)].all() or not truth.any():
        truth[0, 1] = truth[1, 0] = 1 - truth[0, 1]
    rng = np.random.default_rng(seed)
    w = normalize_rows(rng.integers(1, 4, size=(5, 5)).astype(float))  # ties on purpose
    assert edge_auc(w, truth) == pytest.approx(brute_auc(symmetrize(w), truth), abs=1e-15)


def test_degenerate_truth_gives_nan():
    assert np.isnan(edge_auc(np.ones((3, 3)), np.zeros((3, 3))))


def test_misaligned_inputs():
    with pytest.raises(DimensionError):
        edge_auc(np.ones((3, 3)), np.zeros((4, 4)))


def test_symmetrize():
    w = np.array([[0.0, 1.0], [3.0, 0.0]])
    assert symmetrize(w).tolist() == [[0.0, 2.0], [2.0, 0.0]]
