"""Baseline clustering used by the registered initialization.

K-means++ seeding with Lloyd iterations, a PAM-style K-medians for metric
costs, and the distortion functional in both its mean and pairwise forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HardAssignment, LabeledPointCloud, as_points, uniform
from .rng import substream


@dataclass(frozen=True)
class KMeansConfig:
    K: int
    max_iters: int = 100
    tol: float = 1e-9
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


def _sq_dists(X, centers):
    # ||x - c||^2, clipped at 0 against cancellation
    d = (
        np.einsum("ij,ij->i", X, X)[:, None]
        - 2.0 * X @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    return np.maximum(d, 0.0)


def _kmeanspp_seed(X, K, rng):
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1]).ravel()
    for k in range(1, K):
        total = closest.sum()
        if total <= 0:
            centers[k] = X[rng.integers(n)]
            continue
        idx = rng.choice(n, p=closest / total)
        centers[k] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[k : k + 1]).ravel())
    return centers


def _lloyd(X, centers, max_iters, tol):
    K = centers.shape[0]
    n = X.shape[0]
    prev = np.inf
    labels = None
    for _ in range(max_iters):
        d = _sq_dists(X, centers)
        labels = d.argmin(axis=1)  # argmin ties go to the lowest index
        # empty clusters grab the point farthest from its own center, taken
        # from a cluster that can spare it
        counts = np.bincount(labels, minlength=K)
        d_own = d[np.arange(n), labels]
        for k in range(K):
            if counts[k] == 0:
                donor = np.where(counts[labels] > 1, d_own, -np.inf).argmax()
                counts[labels[donor]] -= 1
                counts[k] += 1
                labels[donor] = k
                centers[k] = X[donor]
                d_own[donor] = 0.0
        for k in range(K):
            members = labels == k
            if members.any():
                centers[k] = X[members].mean(axis=0)
        distortion = float(_sq_dists(X, centers)[np.arange(n), labels].sum())
        if prev - distortion <= tol * max(prev, 1e-300):
            break
        prev = distortion
    return labels, centers, distortion


def kmeans(points, cfg: KMeansConfig) -> tuple[HardAssignment, np.ndarray, float]:
    """Best of cfg.restarts K-means++/Lloyd runs, by distortion.

    Deterministic given cfg.seed; restart ties resolve to the lowest restart
    index.
    """
    X = as_points(points)
    n = X.shape[0]
    if cfg.K > n:
        raise ValueError(f"K={cfg.K} exceeds the number of points n={n}")
    best = None
    for r in range(cfg.restarts):
        rng = substream(cfg.seed, f"kmeans-restart-{r}")
        centers = _kmeanspp_seed(X, cfg.K, rng)
        labels, centers, distortion = _lloyd(X, centers, cfg.max_iters, cfg.tol)
        if best is None or distortion < best[2]:
            best = (labels, centers, distortion)
    labels, centers, distortion = best
    return HardAssignment(labels, uniform(n)), centers, distortion


def kmeans_distortion(points, assign: HardAssignment) -> float:
    """Sum of squared distances to cluster means.

    Identical to the pairwise form sum_k (1/|C_k|) sum_{i,j in C_k}
    (1/2) ||x_i - x_j||^2; the mean form is what gets evaluated.
    """
    X = as_points(points)
    labels = assign.labels
    total = 0.0
    for k in np.unique(labels):
        block = X[labels == k]
        mu = block.mean(axis=0)
        total += float(((block - mu) ** 2).sum())
    return total


def pairwise_distortion(points, assign: HardAssignment) -> float:
    """Pairwise form of the K-means distortion, kept as a cross-check."""
    X = as_points(points)
    labels = assign.labels
    total = 0.0
    for k in np.unique(labels):
        block = X[labels == k]
        d = _sq_dists(block, block)
        total += 0.5 * float(d.sum()) / block.shape[0]
    return total


def euclidean_metric(P1, P2) -> np.ndarray:
    """Pairwise Euclidean distances, the default K-medians metric."""
    return np.sqrt(_sq_dists(as_points(P1), as_points(P2)))


def kmedians(points, metric, cfg: KMeansConfig) -> tuple[HardAssignment, np.ndarray, float]:
    """PAM-style K-medians: greedy build then single-swap local search.

    ``metric(A, B)`` must return pairwise costs that are symmetric,
    nonnegative, and zero on the diagonal. Deterministic given cfg.seed.
    """
    X = as_points(points)
    n = X.shape[0]
    if cfg.K > n:
        raise ValueError(f"K={cfg.K} exceeds the number of points n={n}")
    D = np.asarray(metric(X, X), dtype=float)

    rng = substream(cfg.seed, "kmedians-init")
    medoids = [int(rng.integers(n))]
    while len(medoids) < cfg.K:
        closest = D[:, medoids].min(axis=1)
        medoids.append(int(closest.argmax()))
    medoids = np.array(sorted(set(medoids)))
    while medoids.size < cfg.K:  # duplicates collapse on degenerate data
        free = np.setdiff1d(np.arange(n), medoids)
        medoids = np.sort(np.append(medoids, free[0]))

    def total_cost(meds):
        return float(D[:, meds].min(axis=1).sum())

    cost = total_cost(medoids)
    improved = True
    it = 0
    while improved and it < cfg.max_iters:
        improved = False
        it += 1
        for ki in range(cfg.K):
            for cand in range(n):
                if cand in medoids:
                    continue
                trial = medoids.copy()
                trial[ki] = cand
                c = total_cost(trial)
                if c < cost - 1e-15:
                    medoids, cost = np.sort(trial), c
                    improved = True
    labels = D[:, medoids].argmin(axis=1)
    return HardAssignment(labels, uniform(n)), medoids, cost
