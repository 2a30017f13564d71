"""Evaluation metrics for distance recovery and clustering.

Distance quality is measured by the relative Frobenius error of the
client-client block and by a neighborhood F-score that compares k-nearest
neighbor sets under the true and estimated distances. Clustering quality uses
normalized mutual information (arithmetic-mean normalization) and the
adjusted Rand index, both computed from the contingency table.
"""

from __future__ import annotations

import math

import numpy as np


def relative_error(estimated: np.ndarray, truth: np.ndarray) -> float:
    """``||estimated - truth||_F / ||truth||_F`` on distance matrices.

    Both inputs are plain (unsquared) distance matrices of the same shape; a
    zero-norm truth is rejected.
    """
    estimated = np.asarray(estimated, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimated.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimated.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise ValueError("truth matrix has zero norm")
    return float(np.linalg.norm(estimated - truth) / denom)


def _knn_sets(dist: np.ndarray, k: int) -> list[set[int]]:
    n = dist.shape[0]
    work = dist.copy().astype(float)
    np.fill_diagonal(work, np.inf)
    sets = []
    for i in range(n):
        # Stable sort breaks distance ties toward the smaller index.
        order = np.argsort(work[i], kind="stable")
        sets.append(set(order[:k].tolist()))
    return sets


def f_score(estimated: np.ndarray, truth: np.ndarray, k: int = 10) -> float:
    """Neighborhood preservation F-score over directed k-NN sets.

    For every node the ``k`` nearest neighbors (self excluded, ties broken by
    smaller index) are computed under both matrices; true/false positives and
    false negatives are pooled over all nodes and combined as
    ``2 tp / (2 tp + fp + fn)``.
    """
    estimated = np.asarray(estimated, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimated.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimated.shape} vs {truth.shape}")
    n = truth.shape[0]
    if truth.shape != (n, n):
        raise ValueError(f"expected square matrices, got {truth.shape}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"neighborhood size k must lie in [1, {n - 1}], got {k}")
    pred = _knn_sets(estimated, k)
    true = _knn_sets(truth, k)
    tp = fp = fn = 0
    for pred_i, true_i in zip(pred, true):
        hits = len(pred_i & true_i)
        tp += hits
        fp += len(pred_i) - hits
        fn += len(true_i) - hits
    return 2.0 * tp / (2.0 * tp + fp + fn)


def _check_labelings(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise ValueError(f"labelings differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("labelings are empty")
    return a, b


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def nmi(labels_a: np.ndarray, labels_b: np.ndarray) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    ``MI / ((H_a + H_b) / 2)``; two trivial single-cluster labelings agree
    perfectly and score 1 by convention.
    """
    a, b = _check_labelings(labels_a, labels_b)
    table = _contingency(a, b)
    n = table.sum()
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    h_a = float(-np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    h_b = float(-np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    joint = table / n
    outer = np.outer(pa, pb)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    mi = max(mi, 0.0)
    return mi / ((h_a + h_b) / 2.0)


def ari(labels_a: np.ndarray, labels_b: np.ndarray) -> float:
    """Adjusted Rand index from pair counts.

    ``(index - expected) / (max - expected)``; degenerate cases where the
    expected index equals the maximum (for example all-singletons against
    one big cluster) score 0.
    """
    a, b = _check_labelings(labels_a, labels_b)
    table = _contingency(a, b)
    n = int(table.sum())
    sum_cells = sum(math.comb(int(x), 2) for x in table.ravel())
    sum_rows = sum(math.comb(int(x), 2) for x in table.sum(axis=1))
    sum_cols = sum(math.comb(int(x), 2) for x in table.sum(axis=0))
    total = math.comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_rows * sum_cols / total
    maximum = (sum_rows + sum_cols) / 2.0
    if maximum == expected:
        return 0.0 if sum_cells != maximum else 1.0
    return float((sum_cells - expected) / (maximum - expected))
