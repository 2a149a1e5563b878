"""Brute-force ground truth on tiny instances.

Exhaustive optima for the hard low-rank transport problem, generalized
K-means, and the full-to-low-rank cost ratio gamma. These make the
approximation guarantees checkable: the registered clustering optimum must
stay within factor(gamma) of the unrestricted bipartition optimum on every
instance of the matching cost class.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import CostSpec, Permutation, as_cost
from .fullrank import assignment_cost, exact_assignment
from .registration import monge_register

MAX_N_BIPARTITION = 10
MAX_N_PARTITION = 12
MAX_K = 3


def partitions_upto(n: int, K: int):
    """Canonical partitions of range(n) into at most K blocks.

    Yields restricted-growth label vectors: block labels appear in order of
    first occurrence, which prunes relabelings.
    """
    labels = np.zeros(n, dtype=np.int64)

    def rec(i, mx):
        if i == n:
            yield labels.copy()
            return
        for v in range(min(mx + 1, K - 1) + 1):
            labels[i] = v
            yield from rec(i + 1, max(mx, v))

    if n == 0:
        yield labels
    else:
        yield from rec(1, 0)


def partition_pair_cost(C: np.ndarray, labels_x, labels_y) -> float:
    """sum_k (1/|X_k|) sum_{i in X_k} sum_{j in Y_k} C[i, j] (partition units)."""
    labels_x = np.asarray(labels_x)
    labels_y = np.asarray(labels_y)
    total = 0.0
    for k in np.unique(labels_x):
        xi = labels_x == k
        yj = labels_y == k
        if xi.sum() != yj.sum():
            raise ValueError(f"block {k} has mismatched sizes")
        total += C[np.ix_(xi, yj)].sum() / xi.sum()
    return float(total)


def brute_hard_lrot(cost: CostSpec, K: int):
    """Exact optimum of the hard low-rank transport problem.

    Enumerates canonical X-partitions into at most K blocks; for each, the
    best size-matched Y-partition is an exact transportation subproblem
    solved as an assignment over block slots. Returns the cost in plan units
    (partition cost over n) and the optimal label pair.
    """
    cost = as_cost(cost)
    n, m = cost.shape
    if n != m:
        raise ValueError("hard low-rank enumeration needs n == m")
    if n > MAX_N_BIPARTITION or K > MAX_K:
        raise ValueError(
            f"instance too large for enumeration (n={n} > {MAX_N_BIPARTITION} "
            f"or K={K} > {MAX_K})"
        )
    C = cost.materialize()
    best = np.inf
    best_pair = None
    for lx in partitions_upto(n, K):
        B = lx.max() + 1
        onehot = np.zeros((n, B))
        onehot[np.arange(n), lx] = 1.0
        sizes = onehot.sum(axis=0)
        colsum = onehot.T @ C  # colsum[k, j] = sum_{i in X_k} C[i, j]
        slot_block = np.repeat(np.arange(B), sizes.astype(int))
        slot_cost = colsum[slot_block] / sizes[slot_block][:, None]
        rows, cols = linear_sum_assignment(slot_cost)
        total = float(slot_cost[rows, cols].sum())
        if total < best - 1e-15:
            ly = np.empty(n, dtype=np.int64)
            ly[cols] = slot_block[rows]
            best = total
            best_pair = (lx, ly)
    return best / n, best_pair


def brute_gen_kmeans(cost_registered: CostSpec, K: int):
    """Exhaustive generalized K-means optimum, in the same units as
    ``gen_kmeans_cost`` on uniform mass (partition cost over n)."""
    cost = as_cost(cost_registered)
    n, m = cost.shape
    if n != m:
        raise ValueError("generalized K-means enumeration needs a square cost")
    if n > MAX_N_PARTITION or K > MAX_K:
        raise ValueError(
            f"instance too large for enumeration (n={n} > {MAX_N_PARTITION} "
            f"or K={K} > {MAX_K})"
        )
    C = cost.materialize()
    best = np.inf
    best_labels = None
    for labels in partitions_upto(n, K):
        total = partition_pair_cost(C, labels, labels)
        if total < best - 1e-15:
            best = total
            best_labels = labels
    return best / n, best_labels


def brute_balanced_bipartition(cost_registered: CostSpec):
    """Optimal balanced 2-partition of a square registered cost.

    Enumerates subsets of size n/2 and scores each partition against itself,
    which is the clustering optimum among partition pairs aligned with the
    registering map. Partition units.
    """
    cost = as_cost(cost_registered)
    n, m = cost.shape
    if n != m or n % 2:
        raise ValueError("needs a square cost of even order")
    if n > 2 * MAX_N_BIPARTITION:
        raise ValueError(f"instance too large for enumeration (n={n})")
    C = cost.materialize()
    best = np.inf
    best_labels = None
    for half in combinations(range(1, n), n // 2 - 1):
        labels = np.ones(n, dtype=np.int64)
        labels[[0, *half]] = 0
        total = partition_pair_cost(C, labels, labels)
        if total < best - 1e-15:
            best = total
            best_labels = labels
    return best, best_labels


def true_gamma(cost: CostSpec, K: int) -> float:
    """Exact full-rank cost over exact rank-K cost; 0/0 reports 1."""
    cost = as_cost(cost)
    full = assignment_cost(cost, exact_assignment(cost))
    low, _ = brute_hard_lrot(cost, K)
    if low == 0.0:
        return 1.0
    return full / low


_BOUND_FACTORS = {
    "negative_type": lambda g: 1.0 + g,
    "kernel": lambda g: 1.0 + g + np.sqrt(2.0 * g),
    "metric": lambda g: 2.0 + g,  # 1 + gamma + rho with the rho <= 1 envelope
}


@dataclass(frozen=True)
class BoundCheckReport:
    cost_class: str
    gamma: float
    factor: float
    registered_opt: float
    lowrank_opt: float
    fullrank_opt: float
    slack: float
    passed: bool
    sigma: Permutation


def verify_approximation_bound(cost: CostSpec, K: int, cost_class: str, *, slack: float = 1e-9):
    """Check the registered-clustering approximation bound on one instance.

    Computes the optimal matching, registers the cost, and tests

        brute_gen_kmeans(C~, K) <= factor(gamma) * brute_hard_lrot(C, K) + slack

    with factor 1+gamma for negative-type metrics, 1+gamma+sqrt(2 gamma) for
    kernel costs, and the 2+gamma envelope for general metrics.
    """
    if cost_class not in _BOUND_FACTORS:
        raise ValueError(f"unknown cost class {cost_class!r}")
    cost = as_cost(cost)
    sigma = exact_assignment(cost)
    fullrank = assignment_cost(cost, sigma)
    registered = monge_register(cost, sigma)
    lhs, _ = brute_gen_kmeans(registered, K)
    rhs_base, _ = brute_hard_lrot(cost, K)
    gamma = 1.0 if rhs_base == 0.0 else fullrank / rhs_base
    factor = float(_BOUND_FACTORS[cost_class](gamma))
    passed = lhs <= factor * rhs_base + slack
    return BoundCheckReport(
        cost_class=cost_class,
        gamma=float(gamma),
        factor=factor,
        registered_opt=float(lhs),
        lowrank_opt=float(rhs_base),
        fullrank_opt=float(fullrank),
        slack=slack,
        passed=bool(passed),
        sigma=sigma,
    )
