import itertools

import numpy as np
import pytest

from tcluster.clustering import (
    KMeansConfig,
    euclidean_metric,
    kmeans,
    kmeans_distortion,
    kmedians,
    pairwise_distortion,
)
from tcluster.core import HardAssignment, uniform


def test_kmeans_separated_pairs():
    X = np.array([[0.0], [0.1], [10.0], [10.1]])
    assign, centers, distortion = kmeans(X, KMeansConfig(K=2, seed=0))
    assert distortion == pytest.approx(0.01, abs=1e-12)
    assert assign.labels[0] == assign.labels[1]
    assert assign.labels[2] == assign.labels[3]
    assert assign.labels[0] != assign.labels[2]
    # exhaustive 2-partition oracle
    best = min(
        sum(((X[list(block)] - X[list(block)].mean(0)) ** 2).sum() for block in (s, t))
        for s, t in (
            (s, tuple(i for i in range(4) if i not in s))
            for r in range(1, 4)
            for s in itertools.combinations(range(4), r)
        )
    )
    assert distortion == pytest.approx(best, abs=1e-12)


def test_kmeans_degenerate_cases(rng):
    X = rng.normal(size=(5, 2))
    _, _, distortion = kmeans(X, KMeansConfig(K=5, seed=1))
    assert distortion == pytest.approx(0.0, abs=1e-12)
    assign, centers, distortion = kmeans(X, KMeansConfig(K=1, seed=1))
    np.testing.assert_allclose(centers[0], X.mean(axis=0))
    assert distortion == pytest.approx(((X - X.mean(0)) ** 2).sum())


def test_kmeans_deterministic(rng):
    X = rng.normal(size=(40, 3))
    a1 = kmeans(X, KMeansConfig(K=4, seed=7))
    a2 = kmeans(X, KMeansConfig(K=4, seed=7))
    np.testing.assert_array_equal(a1[0].labels, a2[0].labels)
    assert a1[2] == a2[2]


def test_kmeans_never_beats_seeding(rng):
    # Lloyd never increases distortion relative to its own starting point
    X = rng.normal(size=(30, 2))
    from tcluster.clustering import _kmeanspp_seed, _sq_dists
    from tcluster.rng import substream

    cfg = KMeansConfig(K=3, seed=5, restarts=1)
    centers0 = _kmeanspp_seed(X, 3, substream(5, "kmeans-restart-0"))
    d0 = _sq_dists(X, centers0)
    seed_distortion = d0[np.arange(30), d0.argmin(axis=1)].sum()
    _, _, final = kmeans(X, cfg)
    assert final <= seed_distortion + 1e-12


def test_kmeans_handles_duplicates():
    X = np.zeros((6, 2))
    assign, _, distortion = kmeans(X, KMeansConfig(K=3, seed=0))
    assert distortion == pytest.approx(0.0)
    assert assign.labels.max() < 3


def test_distortion_forms_agree(rng):
    X = rng.normal(size=(8, 3))
    labels = rng.integers(0, 3, size=8)
    labels[:3] = np.arange(3)
    assign = HardAssignment(labels, uniform(8))
    assert kmeans_distortion(X, assign) == pytest.approx(
        pairwise_distortion(X, assign), abs=1e-10
    )


def test_distortion_examples():
    X = np.array([[-1.0], [1.0]])
    assign = HardAssignment([0, 0], uniform(2))
    assert kmeans_distortion(X, assign) == pytest.approx(2.0)
    assign = HardAssignment([0, 1], uniform(2))
    assert kmeans_distortion(X, assign) == pytest.approx(0.0)


def test_kmedians_examples():
    X = np.array([[0.0], [1.0], [100.0], [101.0]])
    assign, medoids, cost = kmedians(X, euclidean_metric, KMeansConfig(K=2, seed=0))
    assert cost == pytest.approx(2.0, abs=1e-12)
    assert {frozenset(np.flatnonzero(assign.labels == k)) for k in range(2)} == {
        frozenset({0, 1}),
        frozenset({2, 3}),
    }
    # exhaustive medoid-pair oracle
    D = euclidean_metric(X, X)
    best = min(
        D[:, list(pair)].min(axis=1).sum()
        for pair in itertools.combinations(range(4), 2)
    )
    assert cost == pytest.approx(best, abs=1e-12)


def test_kmedians_degenerate(rng):
    X = rng.normal(size=(4, 2))
    _, _, cost = kmedians(X, euclidean_metric, KMeansConfig(K=4, seed=0))
    assert cost == pytest.approx(0.0)
    X = np.ones((5, 2))
    _, _, cost = kmedians(X, euclidean_metric, KMeansConfig(K=2, seed=0))
    assert cost == pytest.approx(0.0)


def test_kmeans_rejects_k_above_n():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 1)), KMeansConfig(K=3))
    with pytest.raises(ValueError):
        kmedians(np.zeros((2, 1)), euclidean_metric, KMeansConfig(K=3))
