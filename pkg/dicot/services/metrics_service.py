"""
Clustering agreement scores from the contingency table of two labelings.
"""
import numpy as np

from ..exceptions import ShapeError


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"labelings must be 1-D and equally long, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise ShapeError("labelings must be non-empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(a: np.ndarray, b: np.ndarray) -> float:
    """Mutual information over the arithmetic mean of the two entropies (natural log).

    Zero when either labeling has zero entropy.
    """
    table = contingency(a, b)
    n = int(table.sum())
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    h_a = _entropy(rows, n)
    h_b = _entropy(cols, n)
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    nz = table > 0
    joint = table[nz] / n
    outer = np.outer(rows, cols)[nz] / (n * n)
    mi = float((joint * np.log(joint / outer)).sum())
    return float(np.clip(mi / ((h_a + h_b) / 2.0), 0.0, 1.0))


def _pairs(x: np.ndarray) -> float:
    x = x.astype(np.float64)
    return float((x * (x - 1) / 2.0).sum())


def ari(a: np.ndarray, b: np.ndarray) -> float:
    """Rand index adjusted for chance.

    When the chance-corrected denominator vanishes the two labelings are
    either both a single cluster (0.0) or identical all-singleton
    partitions (1.0).
    """
    table = contingency(a, b)
    n = int(table.sum())
    index = _pairs(table)
    sum_a = _pairs(table.sum(axis=1))
    sum_b = _pairs(table.sum(axis=0))
    total_pairs = n * (n - 1) / 2.0
    expected = sum_a * sum_b / total_pairs if total_pairs > 0 else 0.0
    maximum = (sum_a + sum_b) / 2.0
    if maximum == expected:
        return 1.0 if table.shape[0] >= 2 else 0.0
    return float((index - expected) / (maximum - expected))
