"""Clustering quality: accuracy under optimal matching, NMI, pairwise F-score."""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import LengthMismatchError, NonSquareError, ValidationError


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # k_pred x k_true
    n: int


def _pair(pred, truth):
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if pred.shape != truth.shape:
        raise LengthMismatchError(f"pred has {pred.size} labels, truth has {truth.size}")
    if pred.size == 0:
        raise ValidationError("need at least one sample")
    return pred, truth


def contingency(pred, truth) -> ContingencyTable:
    pred, truth = _pair(pred, truth)
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    counts = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(counts, (pi.reshape(-1), ti.reshape(-1)), 1)
    return ContingencyTable(counts, int(pred.size))


def hungarian(cost):
    """Minimum-cost perfect assignment for a square cost matrix.

    Returns ``perm`` with row ``i`` assigned to column ``perm[i]``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise NonSquareError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValidationError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def accuracy(pred, truth) -> float:
    C = contingency(pred, truth).counts
    size = max(C.shape)
    padded = np.zeros((size, size))
    padded[: C.shape[0], : C.shape[1]] = C
    perm = hungarian(-padded)
    return float(padded[np.arange(size), perm].sum() / C.sum())


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies (nats)."""
    table = contingency(pred, truth)
    C, n = table.counts, table.n
    hp = _entropy(C.sum(axis=1), n)
    ht = _entropy(C.sum(axis=0), n)
    if hp == 0.0 or ht == 0.0:
        # a single-cluster side carries no information; identical iff both are single
        return 1.0 if hp == ht else 0.0
    nz = C > 0
    if C.shape[0] == C.shape[1] and nz.sum() == C.shape[0]:
        # same partition up to relabeling; skip the rounding in MI / H
        return 1.0
    pij = C[nz] / n
    pi = (C.sum(axis=1)[:, None] / n * np.ones_like(C))[nz]
    pj = (C.sum(axis=0)[None, :] / n * np.ones_like(C))[nz]
    mi = float((pij * np.log(pij / (pi * pj))).sum())
    return float(min(1.0, max(0.0, mi / np.sqrt(hp * ht))))


def _pairs(x):
    x = np.asarray(x, dtype=np.float64)
    return float((x * (x - 1.0) / 2.0).sum())


def fscore(pred, truth) -> float:
    """Pairwise F1 over all unordered sample pairs."""
    pred, truth = _pair(pred, truth)
    if pred.size < 2:
        raise ValidationError("pairwise F-score needs at least 2 samples")
    C = contingency(pred, truth).counts
    both = _pairs(C)
    same_pred = _pairs(C.sum(axis=1))
    same_truth = _pairs(C.sum(axis=0))
    precision = both / same_pred if same_pred > 0 else 1.0
    recall = both / same_truth if same_truth > 0 else 1.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(pred, truth) -> dict:
    return {"acc": accuracy(pred, truth), "nmi": nmi(pred, truth), "fscore": fscore(pred, truth)}
