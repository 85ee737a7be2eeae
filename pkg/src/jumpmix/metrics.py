"""Partition agreement."""
from __future__ import annotations

import numpy as np


def _pairs(x: np.ndarray) -> float:
    return float(np.sum(x * (x - 1) / 2.0))


def contingency_table(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"partitions must be 1-d and equally long, got {a.shape} and {b.shape}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max(initial=-1) + 1, ib.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def ari(a, b) -> float:
    """Adjusted Rand index between two labelings of the same elements.

    Computed from the contingency table n_ij with margins a_i, b_j. When the
    index is 0/0 (both partitions trivial, or fewer than two elements) the two
    partitions are identical and 1.0 is returned.
    """
    table = contingency_table(a, b)
    n = int(table.sum())
    sum_ij = _pairs(table.astype(float))
    sum_a = _pairs(table.sum(axis=1).astype(float))
    sum_b = _pairs(table.sum(axis=0).astype(float))
    total = n * (n - 1) / 2.0
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0:
        return 1.0
    return (sum_ij - expected) / denom
