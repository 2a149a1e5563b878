"""Seeded generators for synthetic benchmarks and adversarial arrangements.

Every generator is a pure function of its parameters and seed; regeneration
is bit-identical. Randomness is drawn from named substreams so unrelated
stages never share state.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .core import DenseCost, LabeledPointCloud
from .rng import substream

UNIT_CIRCLE_MEANS = np.array(
    [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1 / np.sqrt(2), 1 / np.sqrt(2)),
        (1 / np.sqrt(2), -1 / np.sqrt(2)),
        (-1 / np.sqrt(2), 1 / np.sqrt(2)),
        (-1 / np.sqrt(2), -1 / np.sqrt(2)),
    ]
)

# the interleaving-moons construction: unit radius, symmetric offsets,
# isotropic noise of variance 0.5 before the affine overlap map
_MOON_OFFSET = np.array([0.5, 0.25])
_MOON_NOISE_VAR = 0.5
_MOON_SCALE = 3.0
_MOON_SHIFT = np.array([-1.0, -1.0])


class DisconnectedGraphError(RuntimeError):
    """The sampled graph stayed disconnected for the whole resampling budget."""


def _even_counts(n, k):
    counts = np.full(k, n // k, dtype=int)
    counts[: n % k] += 1
    return counts


def gen_moons_gaussians(
    n: int, noise_sigma2: float, seed: int
) -> tuple[LabeledPointCloud, LabeledPointCloud]:
    """Two noisy interleaving moons (X) against 8 unit-circle Gaussians (Y).

    X is scaled by 3 and shifted by (-1, -1) to overlap the Gaussians; the
    Gaussian side uses isotropic noise of variance ``noise_sigma2``. X labels
    index the moon, Y labels the Gaussian.
    """
    if n < 8:
        raise ValueError("need at least 8 points")
    rng = substream(seed, "moons")
    counts = _even_counts(n, 2)
    pts = []
    labels = []
    for moon, cnt in enumerate(counts):
        theta = rng.uniform(0.0, np.pi, size=cnt)
        arc = np.column_stack([np.cos(theta), np.sin(theta)])
        if moon == 0:
            arc = arc - _MOON_OFFSET
        else:
            arc[:, 1] *= -1.0
            arc = arc + _MOON_OFFSET
        arc = arc + rng.normal(0.0, np.sqrt(_MOON_NOISE_VAR), size=arc.shape)
        pts.append(arc)
        labels.append(np.full(cnt, moon))
    X = _MOON_SCALE * np.vstack(pts) + _MOON_SHIFT
    x_labels = np.concatenate(labels)

    rng = substream(seed, "gaussians")
    counts = _even_counts(n, 8)
    pts = []
    labels = []
    for g, cnt in enumerate(counts):
        block = UNIT_CIRCLE_MEANS[g] + rng.normal(
            0.0, np.sqrt(noise_sigma2), size=(cnt, 2)
        )
        pts.append(block)
        labels.append(np.full(cnt, g))
    Y = np.vstack(pts)
    y_labels = np.concatenate(labels)
    return (
        LabeledPointCloud(X, x_labels, seed=seed),
        LabeledPointCloud(Y, y_labels, seed=seed),
    )


def gen_shifted_gaussians(
    n: int, K: int, sigma2: float, seed: int
) -> tuple[LabeledPointCloud, LabeledPointCloud, np.ndarray]:
    """Paired Gaussian mixtures with perturbed means.

    Means sit at the basis vectors of R^K; the second dataset's means are
    perturbed by N(0, (0.1/sqrt(n)) I). Cluster sizes are a random
    composition of n with at least one point per cluster, shared between the
    two datasets, so the returned labels apply to both.
    """
    if K > n:
        raise ValueError(f"K={K} exceeds n={n}")
    rng = substream(seed, "sg-partition")
    sizes = np.ones(K, dtype=int)
    if n > K:
        sizes += rng.multinomial(n - K, np.full(K, 1.0 / K))
    means = np.eye(K)
    rng = substream(seed, "sg-perturb")
    means_y = means + rng.normal(0.0, np.sqrt(0.1 / np.sqrt(n)), size=means.shape)

    labels = np.repeat(np.arange(K), sizes)
    std = np.sqrt(sigma2 / np.sqrt(n))
    rng = substream(seed, "sg-x")
    X = means[labels] + rng.normal(0.0, std, size=(n, K))
    rng = substream(seed, "sg-y")
    Y = means_y[labels] + rng.normal(0.0, std, size=(n, K))
    return (
        LabeledPointCloud(X, labels, seed=seed),
        LabeledPointCloud(Y, labels, seed=seed),
        labels,
    )


def gen_sbm_cost(
    K: int,
    cluster_size: int,
    p: float,
    q: float,
    weight_range: tuple[float, float] = (1.0, 2.0),
    seed: int = 0,
    resample_budget: int = 100,
) -> tuple[DenseCost, np.ndarray]:
    """Shortest-path cost matrix of a weighted stochastic block model.

    Edges appear with probability p inside a block and q across blocks;
    weights are uniform on ``weight_range``. The graph is resampled up to
    ``resample_budget`` times until connected, then the symmetric all-pairs
    shortest-path matrix and the planted labels are returned.
    """
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("p and q must be probabilities")
    n = K * cluster_size
    labels = np.repeat(np.arange(K), cluster_size)
    same = labels[:, None] == labels[None, :]
    lo, hi = weight_range
    for attempt in range(resample_budget):
        rng = substream(seed, f"sbm-{attempt}")
        prob = np.where(same, p, q)
        iu = np.triu_indices(n, k=1)
        edges = rng.random(iu[0].size) < prob[iu]
        weights = rng.uniform(lo, hi, size=iu[0].size)
        A = np.zeros((n, n))
        A[iu[0][edges], iu[1][edges]] = weights[edges]
        A = A + A.T
        D = dijkstra(csr_matrix(A), directed=False)
        if np.all(np.isfinite(D)):
            D = 0.5 * (D + D.T)
            return DenseCost(D), labels
    raise DisconnectedGraphError(
        f"no connected graph in {resample_budget} samples (p={p}, q={q})"
    )


def gen_fragmented_hypercube(
    n: int, d: int, seed: int
) -> tuple[LabeledPointCloud, LabeledPointCloud]:
    """Uniform cube against its sign-shifted pushforward.

    X ~ Unif([-1, 1]^d); Y applies T(x) = x + 2 sgn(x) (e1 + e2) to an
    independent uniform sample, so the two clouds are independent empirical
    measures of mu and T#mu.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    rng = substream(seed, "hypercube-x")
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    rng = substream(seed, "hypercube-y")
    Y = rng.uniform(-1.0, 1.0, size=(n, d))
    Y[:, 0] += 2.0 * np.sign(Y[:, 0])
    Y[:, 1] += 2.0 * np.sign(Y[:, 1])
    return LabeledPointCloud(X, seed=seed), LabeledPointCloud(Y, seed=seed)


HYPERCUBE_W2_SQ = 8.0  # population squared Wasserstein distance of the map T


# ---------------------------------------------------------------------------
# adversarial arrangements where the optimal matching is a poor co-clustering
# ---------------------------------------------------------------------------


def build_euclidean_lb(k: int, eps: float) -> tuple[LabeledPointCloud, LabeledPointCloud]:
    """Unstable Euclidean arrangement of 2k+2 points near [0, 2] x {0}.

    Point order: [P, M, L_1..L_k, R_1..R_k] on both sides, with the L and R
    stacks coincident across datasets, so the unique optimal matching is the
    identity permutation with cost exactly 2.
    """
    if k < 1 or not (0 < eps < 1):
        raise ValueError("need k >= 1 and 0 < eps < 1")
    heights = -np.arange(1, k + 1) * eps / k
    L = np.column_stack([np.zeros(k), heights])
    R = np.column_stack([np.full(k, 2.0), heights])
    X = np.vstack([[0.0, eps], [1.0, -eps], L, R])
    Y = np.vstack([[2.0, eps], [1.0, -eps], L, R])
    return LabeledPointCloud(X, seed=0), LabeledPointCloud(Y, seed=0)


def euclidean_lb_reference(k: int, eps: float) -> dict:
    """Closed-form quantities for the Euclidean arrangement.

    ``sigma_respecting_bound`` lower-bounds the balanced 2-partition optimum
    among partitions aligned with the optimal matching; the listed non-Monge
    bipartition costs 2 + O(eps) and certifies that unrestricted solutions
    are a factor approaching 2 cheaper.
    """
    li = list(range(2, k + 2))
    ri = list(range(k + 2, 2 * k + 2))
    return {
        "monge_cost": 2.0,
        "sigma_respecting_bound": (4.0 * k + 2.0) / (k + 1.0),
        "nonmonge_parts_x": ([0] + li, [1] + ri),
        "nonmonge_parts_y": ([1] + li, [0] + ri),
        "nonmonge_limit_cost": 2.0,
    }


def build_sqeuclidean_lb(k: int, eps: float) -> tuple[LabeledPointCloud, LabeledPointCloud]:
    """Unstable squared-Euclidean arrangement on the square [0, 2]^2.

    Point order: [P1, P2, L_1..L_k, R_1..R_k] against [Q1, Q2, L, R]; the L
    points pile up at the corner (0, 2) and the R points at (2, 0). The
    optimal matching sends P1 -> Q2 and P2 -> Q1 at cost 4 + 2 eps^2 - 4 eps.
    """
    if k < 1 or not (0 < eps < 1):
        raise ValueError("need k >= 1 and 0 < eps < 1")
    L = np.tile([0.0, 2.0], (k, 1))
    R = np.tile([2.0, 0.0], (k, 1))
    X = np.vstack([[1.0 + eps, 2.0], [1.0 - eps, 0.0], L, R])
    Y = np.vstack([[0.0, 1.0], [2.0, 1.0], L, R])
    return LabeledPointCloud(X, seed=0), LabeledPointCloud(Y, seed=0)


def sqeuclidean_lb_reference(k: int, eps: float) -> dict:
    li = list(range(2, k + 2))
    ri = list(range(k + 2, 2 * k + 2))
    return {
        "monge_cost": 4.0 + 2.0 * eps**2 - 4.0 * eps,
        "sigma_respecting_bound": (12.0 * k + 4.0) / (k + 1.0),
        "nonmonge_parts_x": ([0] + li, [1] + ri),
        "nonmonge_parts_y": ([0] + li, [1] + ri),
        "nonmonge_limit_cost": 4.0,
    }
