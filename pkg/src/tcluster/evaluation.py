"""Clustering and transport quality metrics."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .core import Coupling, LowRankPlan


def _contingency(labels_a, labels_b):
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape or labels_a.ndim != 1:
        raise ValueError("labelings must be 1-D and of equal length")
    _, ia = np.unique(labels_a, return_inverse=True)
    _, ib = np.unique(labels_b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index via the pair-counting closed form."""
    table = _contingency(labels_a, labels_b)
    n = table.sum()
    sum_comb = (table * (table - 1) // 2).sum()
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    comb_a = (a * (a - 1) // 2).sum()
    comb_b = (b * (b - 1) // 2).sum()
    total = n * (n - 1) // 2
    expected = comb_a * comb_b / total if total else 0.0
    max_index = 0.5 * (comb_a + comb_b)
    if max_index == expected:
        return 1.0  # both labelings degenerate; identical partitions
    return float((sum_comb - expected) / (max_index - expected))


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _expected_mi(a, b, n):
    """Expectation of MI under the hypergeometric permutation model."""
    emi = 0.0
    lg = gammaln
    ln = lg(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            for nij in range(lo, hi + 1):
                term = (nij / n) * np.log(n * nij / (ai * bj))
                log_w = (
                    lg(ai + 1)
                    + lg(bj + 1)
                    + lg(n - ai + 1)
                    + lg(n - bj + 1)
                    - ln
                    - lg(nij + 1)
                    - lg(ai - nij + 1)
                    - lg(bj - nij + 1)
                    - lg(n - ai - bj + nij + 1)
                )
                emi += term * np.exp(log_w)
    return emi


def ami(labels_a, labels_b) -> float:
    """Adjusted mutual information, normalized by max(H_a, H_b)."""
    table = _contingency(labels_a, labels_b)
    n = int(table.sum())
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    ha = _entropy(a, n)
    hb = _entropy(b, n)
    if ha == 0.0 and hb == 0.0:
        return 1.0  # both labelings are a single cluster
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(a, b)[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    emi = _expected_mi(a, b, n)
    denom = max(ha, hb) - emi
    if abs(denom) < 1e-15:
        return 0.0
    return float((mi - emi) / denom)


def cta(plan, labels_x, labels_y) -> float:
    """Class-transfer accuracy: coupling mass staying within a class.

    Builds the class-to-class density rho[k, k'] = sum_ij P_ij over pairs
    with label_x = k and label_y = k' (through the factors when the plan is
    low-rank) and returns trace(rho) / sum(rho).
    """
    labels_x = np.asarray(labels_x)
    labels_y = np.asarray(labels_y)
    classes = np.unique(np.concatenate([labels_x, labels_y]))
    if classes.size == 0:
        raise ValueError("empty class vocabulary")
    lut = {c: i for i, c in enumerate(classes)}
    ix = np.array([lut[c] for c in labels_x])
    iy = np.array([lut[c] for c in labels_y])
    C = classes.size

    def onehot(idx, rows):
        M = np.zeros((rows, C))
        M[np.arange(rows), idx] = 1.0
        return M

    if isinstance(plan, LowRankPlan):
        Lx = onehot(ix, plan.n)
        Ly = onehot(iy, plan.m)
        rho = (Lx.T @ plan.Q) @ ((Ly.T @ plan.R) / plan.g).T
    else:
        P = plan.matrix if isinstance(plan, Coupling) else np.asarray(plan, dtype=float)
        rho = onehot(ix, P.shape[0]).T @ P @ onehot(iy, P.shape[1])
    total = rho.sum()
    if total <= 0:
        raise ValueError("plan carries no mass")
    return float(np.trace(rho) / total)


def relative_cost(candidate: float, reference: float) -> float:
    """candidate / reference, guarding against nonpositive references."""
    if reference <= 0:
        raise ValueError(f"reference cost must be positive, got {reference!r}")
    return float(candidate) / float(reference)
