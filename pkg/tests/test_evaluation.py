import itertools

import numpy as np
import pytest
from sklearn.metrics import adjusted_mutual_info_score, adjusted_rand_score

from tcluster.core import Coupling, LowRankPlan, assemble_plan, uniform
from tcluster.evaluation import ami, ari, cta, relative_cost

from conftest import ipf_plan


def pair_counting_ari(a, b):
    """Rand-index oracle from raw pair agreement counts."""
    n = len(a)
    same_a = np.equal.outer(a, a)
    same_b = np.equal.outer(b, b)
    iu = np.triu_indices(n, 1)
    s11 = int((same_a & same_b)[iu].sum())
    s00 = int((~same_a & ~same_b)[iu].sum())
    s10 = int((same_a & ~same_b)[iu].sum())
    s01 = int((~same_a & same_b)[iu].sum())
    total = s11 + s00 + s10 + s01
    expected = (s11 + s10) * (s11 + s01) / total
    max_index = 0.5 * ((s11 + s10) + (s11 + s01))
    return (s11 - expected) / (max_index - expected)


def test_ari_trivials():
    assert ari([0, 1, 2], [0, 1, 2]) == pytest.approx(1.0)
    assert ari([0, 0, 1, 1], [5, 5, 9, 9]) == pytest.approx(1.0)  # renaming
    assert ari([0, 1, 0, 1], [1, 0, 1, 0]) == pytest.approx(1.0)


def test_ari_hand_counted_case():
    a = [0, 0, 1, 1]
    b = [0, 1, 0, 1]
    assert ari(a, b) == pytest.approx(pair_counting_ari(a, b))
    assert ari(a, b) == pytest.approx(-0.5)


def test_ari_matches_sklearn(rng):
    for _ in range(20):
        n = int(rng.integers(4, 30))
        a = rng.integers(0, 4, size=n)
        b = rng.integers(0, 3, size=n)
        assert ari(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-10)
        assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-12)


def test_ami_trivials():
    assert ami([0, 1, 0, 2], [0, 1, 0, 2]) == pytest.approx(1.0)
    assert ami([0, 0, 0, 0], [0, 1, 0, 1]) == pytest.approx(0.0)
    assert ami([0, 0], [1, 1]) == pytest.approx(1.0)  # both single-cluster


def test_ami_matches_sklearn_max_normalization(rng):
    for _ in range(15):
        n = int(rng.integers(5, 25))
        a = rng.integers(0, 3, size=n)
        b = rng.integers(0, 4, size=n)
        expected = adjusted_mutual_info_score(a, b, average_method="max")
        assert ami(a, b) == pytest.approx(expected, abs=1e-9)


def test_cta_identity_plan():
    n = 4
    P = Coupling(np.eye(n) / n, uniform(n), uniform(n))
    labels = [0, 1, 0, 1]
    assert cta(P, labels, labels) == pytest.approx(1.0)
    assert cta(P, labels, [2, 3, 2, 3]) == pytest.approx(0.0)


def test_cta_factored_matches_dense(rng):
    plan = ipf_plan(rng, 6, 5, 2)
    lx = rng.integers(0, 3, size=6)
    ly = rng.integers(0, 3, size=5)
    dense = assemble_plan(plan)
    # double-loop oracle
    classes = np.unique(np.concatenate([lx, ly]))
    idx = {c: i for i, c in enumerate(classes)}
    rho = np.zeros((len(classes), len(classes)))
    for i in range(6):
        for j in range(5):
            rho[idx[lx[i]], idx[ly[j]]] += dense.matrix[i, j]
    expected = np.trace(rho) / rho.sum()
    assert cta(plan, lx, ly) == pytest.approx(expected, abs=1e-12)
    assert cta(dense, lx, ly) == pytest.approx(expected, abs=1e-12)
    assert 0.0 <= cta(plan, lx, ly) <= 1.0


def test_cta_single_class_is_one(rng):
    plan = ipf_plan(rng, 5, 5, 2)
    assert cta(plan, np.zeros(5, int), np.zeros(5, int)) == pytest.approx(1.0)


def test_relative_cost():
    assert relative_cost(2.0, 2.0) == 1.0
    assert relative_cost(2.0, 4.0) == 0.5
    with pytest.raises(ValueError):
        relative_cost(1.0, 0.0)
