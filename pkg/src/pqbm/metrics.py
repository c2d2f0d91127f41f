"""Classification metrics: accuracy, ROC AUC, and the composite selection score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoredPrediction:
    """One scored binary prediction against ground truth."""

    score: float
    predicted: int
    truth: int


def accuracy_score(truth: np.ndarray, predicted: np.ndarray) -> float:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.size == 0:
        raise ValueError("cannot score an empty prediction list")
    if truth.shape != predicted.shape:
        raise ValueError("truth and predictions must align")
    return float(np.mean(truth == predicted))


def auc_score(truth: np.ndarray, score: np.ndarray) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) statistic.

    Equals the probability that a uniformly random positive outscores a
    uniformly random negative, with ties counted as one half.
    """
    truth = np.asarray(truth).astype(bool)
    score = np.asarray(score, dtype=float)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative truth")
    order = np.argsort(score, kind="mergesort")
    ranks = np.empty(truth.size, dtype=float)
    sorted_scores = score[order]
    i = 0
    while i < truth.size:
        j = i
        while j + 1 < truth.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[truth].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def composite_score(acc: float, auc: float) -> float:
    """Selection criterion for hyperparameter search: equal-weight mix."""
    for name, v in (("acc", acc), ("auc", auc)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return 0.5 * acc + 0.5 * auc


def accuracy(preds: list[ScoredPrediction]) -> float:
    return accuracy_score(
        np.array([p.truth for p in preds]), np.array([p.predicted for p in preds])
    )


def auc(preds: list[ScoredPrediction]) -> float:
    return auc_score(
        np.array([p.truth for p in preds]), np.array([p.score for p in preds])
    )


def composite(acc_value: float, auc_value: float) -> float:
    return composite_score(acc_value, auc_value)
