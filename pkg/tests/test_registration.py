import numpy as np
import pytest

from tcluster.core import (
    Coupling,
    FactoredCost,
    FeasibilityError,
    HardAssignment,
    LowRankPlan,
    Permutation,
    SqEuclideanCost,
    as_cost,
    hard_to_factor,
    uniform,
)
from tcluster.genkmeans import gen_kmeans_cost
from tcluster.registration import (
    kantorovich_register,
    monge_register,
    recover_second_factor,
)

from conftest import ipf_plan


def test_monge_register_identity_and_swap():
    C = np.array([[1.0, 2.0], [3.0, 4.0]])
    same = monge_register(as_cost(C), Permutation([0, 1]))
    np.testing.assert_allclose(same.materialize(), C)
    swapped = monge_register(as_cost(C), Permutation([1, 0]))
    np.testing.assert_allclose(swapped.materialize(), [[2.0, 1.0], [4.0, 3.0]])


def test_monge_register_factored_matches_dense(rng):
    X = rng.normal(size=(8, 3))
    Y = rng.normal(size=(8, 3))
    sigma = Permutation(rng.permutation(8))
    fc = SqEuclideanCost(X, Y)
    reg = monge_register(fc, sigma)
    assert reg.is_factored
    dense = monge_register(as_cost(fc.materialize()), sigma)
    np.testing.assert_allclose(reg.materialize(), dense.materialize(), atol=1e-12)
    gc = FactoredCost(rng.normal(size=(8, 2)), rng.normal(size=(8, 2)))
    np.testing.assert_allclose(
        monge_register(gc, sigma).materialize(),
        monge_register(as_cost(gc.materialize()), sigma).materialize(),
        atol=1e-12,
    )


def test_monge_register_inverse_round_trip(rng):
    C = rng.random((6, 6))
    sigma = Permutation(rng.permutation(6))
    back = monge_register(monge_register(as_cost(C), sigma), sigma.inverse())
    np.testing.assert_allclose(back.materialize(), C, atol=1e-15)


def test_reparameterization_identity(rng):
    # <C~, Q diag(1/g) Q'> equals <C, Q diag(1/g) (P_sigma' Q)'> for hard Q
    n, K = 9, 3
    for _ in range(10):
        labels = rng.integers(0, K, size=n)
        labels[:K] = np.arange(K)
        Q, g = hard_to_factor(HardAssignment(labels, uniform(n)), K)
        sigma = Permutation(rng.permutation(n))
        C = rng.random((n, n))
        registered = monge_register(as_cost(C), sigma)
        lhs = gen_kmeans_cost(registered, Q)
        R = sigma.permute_rows_t(Q)
        rhs = float(np.sum(C * ((Q / g) @ R.T)))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_kantorovich_register_permutation_reduces_to_monge(rng):
    n = 5
    sigma = Permutation(rng.permutation(n))
    P = Coupling(sigma.matrix() / n, uniform(n), uniform(n))
    C = rng.random((n, n))
    reg = kantorovich_register(as_cost(C), P, uniform(n))
    np.testing.assert_allclose(
        reg.materialize(),
        monge_register(as_cost(C), sigma).materialize(),
        atol=1e-12,
    )


def test_kantorovich_register_independent_coupling(rng):
    a = uniform(4)
    b = uniform(6)
    P = Coupling(np.outer(a, b), a, b)
    C = rng.random((4, 6))
    reg = kantorovich_register(as_cost(C), P, a).materialize()
    col = C @ b
    for j in range(4):
        np.testing.assert_allclose(reg[:, j], col, atol=1e-12)


def test_kantorovich_register_dense_oracle(rng):
    plan = ipf_plan(rng, 5, 3, 2)
    from tcluster.core import assemble_plan

    P = assemble_plan(plan)
    C = rng.random((5, 3))
    reg = kantorovich_register(as_cost(C), P, P.row_marginal).materialize()
    expected = C @ P.matrix.T @ np.diag(1.0 / P.row_marginal)
    np.testing.assert_allclose(reg, expected, atol=1e-12)


def test_kantorovich_register_factored_paths(rng):
    X = rng.normal(size=(6, 2))
    Y = rng.normal(size=(4, 2))
    plan = ipf_plan(rng, 6, 4, 2)
    from tcluster.core import assemble_plan

    P = assemble_plan(plan)
    fc = SqEuclideanCost(X, Y)
    reg = kantorovich_register(fc, P, P.row_marginal)
    assert reg.is_factored
    dense = kantorovich_register(as_cost(fc.materialize()), P, P.row_marginal)
    np.testing.assert_allclose(reg.materialize(), dense.materialize(), atol=1e-10)
    # symmetric R-side variant is an m x m registered cost
    reg_r = kantorovich_register(fc, P, P.row_marginal, side="r")
    assert reg_r.shape == (4, 4)
    dense_r = (fc.materialize().T @ P.matrix) / P.col_marginal[None, :]
    np.testing.assert_allclose(reg_r.materialize(), dense_r, atol=1e-10)


def test_recover_second_factor_monge_case(rng):
    n, K = 6, 2
    labels = rng.integers(0, K, size=n)
    labels[:K] = np.arange(K)
    Q, g = hard_to_factor(HardAssignment(labels, uniform(n)), K)
    sigma = Permutation(rng.permutation(n))
    P = Coupling(sigma.matrix() / n, uniform(n), uniform(n))
    R = recover_second_factor(P, uniform(n), Q)
    np.testing.assert_allclose(R, sigma.permute_rows_t(Q), atol=1e-12)


def test_recover_second_factor_single_cluster(rng):
    plan = ipf_plan(rng, 5, 7, 2)
    from tcluster.core import assemble_plan

    P = assemble_plan(plan)
    a = P.row_marginal
    R = recover_second_factor(P, a, a[:, None])
    np.testing.assert_allclose(R.ravel(), P.col_marginal, atol=1e-12)


def test_recover_second_factor_feasibility(rng):
    plan = ipf_plan(rng, 6, 4, 2)
    from tcluster.core import assemble_plan

    P = assemble_plan(plan)
    a = P.row_marginal
    Q = ipf_plan(rng, 6, 4, 2).Q
    R = recover_second_factor(P, a, Q)
    np.testing.assert_allclose(R.sum(axis=1), P.col_marginal, atol=1e-6)
    np.testing.assert_allclose(R.sum(axis=0), Q.sum(axis=0), atol=1e-6)
    LowRankPlan(Q, R, Q.sum(axis=0))  # triple is feasible
    with pytest.raises(FeasibilityError):
        recover_second_factor(P, a, np.ones((6, 2)))
