"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line; run with ``pytest -s tests/test_acceptance.py``
to see them inline.
"""

import itertools
import time

import numpy as np
import pytest

from tcluster.clustering import KMeansConfig, kmeans, kmeans_distortion, pairwise_distortion
from tcluster.core import (
    HardAssignment,
    SqEuclideanCost,
    as_cost,
    assemble_plan,
    hard_to_factor,
    lrot_cost,
    plan_from_hard,
    uniform,
)
from tcluster.datasets import (
    build_euclidean_lb,
    build_sqeuclidean_lb,
    euclidean_lb_reference,
    gen_fragmented_hypercube,
    gen_moons_gaussians,
    gen_shifted_gaussians,
    sqeuclidean_lb_reference,
)
from tcluster.evaluation import ari
from tcluster.fullrank import (
    SinkhornConfig,
    assignment_cost,
    exact_assignment,
    extract_permutation,
    sinkhorn,
)
from tcluster.genkmeans import GkmsConfig, gen_kmeans_cost, gkms_gradient
from tcluster.oracle import (
    brute_balanced_bipartition,
    partition_pair_cost,
    verify_approximation_bound,
)
from tcluster.pipeline import (
    TcConfig,
    registered_init,
    transport_cluster,
    transport_cluster_kantorovich,
    w2_estimate,
)
from tcluster.registration import monge_register
from tcluster.rng import substream


def _report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num} {status}: {detail}")
    assert ok, f"criterion {num}: {detail}"


# -------------------------------------------------------------------- 1 ----


def test_criterion_1_registered_clustering_bounds():
    t0 = time.time()
    n, K, trials = 6, 2, 500
    failures = 0
    for cost_class, builder in [
        ("kernel", lambda d: (d**2).sum(-1)),
        ("negative_type", lambda d: np.sqrt((d**2).sum(-1))),
    ]:
        for t in range(trials):
            rng = substream(101, f"{cost_class}-{t}")
            X = rng.uniform(size=(n, 2))
            Y = rng.uniform(size=(n, 2))
            C = as_cost(builder(X[:, None, :] - Y[None, :, :]))
            rep = verify_approximation_bound(C, K, cost_class, slack=1e-9)
            failures += not rep.passed
    elapsed = time.time() - t0
    _report(
        1,
        failures == 0 and elapsed < 300,
        f"0 expected bound violations, got {failures} over {2 * trials} trials "
        f"(kernel and negative-type classes) in {elapsed:.1f}s (< 300s)",
    )


# -------------------------------------------------------------------- 2 ----


def test_criterion_2_lower_bound_constructions():
    k, eps = 200, 1e-3
    # Euclidean arrangement
    X, Y = build_euclidean_lb(k, eps)
    n = 2 * k + 2
    C = np.sqrt(((X.points[:, None] - Y.points[None, :]) ** 2).sum(-1))
    sigma = exact_assignment(as_cost(C))
    monge_cost = float(C[np.arange(n), sigma.sigma].sum())
    ref = euclidean_lb_reference(k, eps)
    ok_a = (
        np.array_equal(sigma.sigma, np.arange(n))
        and abs(monge_cost - 2.0) <= 1e-9
    )
    bound = ref["sigma_respecting_bound"]
    ok_b = bound >= (4 * k + 2) / (k + 1) - 1e-6
    # small-k oracle cross-check of the closed form
    for k_small in (2, 3):
        Xs, Ys = build_euclidean_lb(k_small, eps)
        Cs = as_cost(np.sqrt(((Xs.points[:, None] - Ys.points[None, :]) ** 2).sum(-1)))
        sig_s = exact_assignment(Cs)
        opt, _ = brute_balanced_bipartition(monge_register(Cs, sig_s))
        ok_b = ok_b and opt >= (4 * k_small + 2) / (k_small + 1) - 1e-6
    ratio = bound / monge_cost
    ok_c = ratio >= 1.9

    # squared-Euclidean arrangement
    X, Y = build_sqeuclidean_lb(k, eps)
    C = ((X.points[:, None] - Y.points[None, :]) ** 2).sum(-1)
    sigma = exact_assignment(as_cost(C))
    sq_monge = float(C[np.arange(n), sigma.sigma].sum())
    sq_ref = sqeuclidean_lb_reference(k, eps)
    ok_d = abs(sq_monge - (4 + 2 * eps**2 - 4 * eps)) <= 1e-9
    sq_ratio = sq_ref["sigma_respecting_bound"] / sq_monge
    ok_e = sq_ratio >= 2.85
    _report(
        2,
        ok_a and ok_b and ok_c and ok_d and ok_e,
        f"euclidean: monge {monge_cost:.12f} (=2), ratio {ratio:.3f} (>=1.9); "
        f"sq-euclidean: monge {sq_monge:.9f} (=4+2e^2-4e), ratio {sq_ratio:.3f} (>=2.85)",
    )


# -------------------------------------------------------------------- 3 ----


def test_criterion_3_w2_estimation():
    t0 = time.time()
    d, K, runs = 30, 10, 10
    grid = [29, 36, 44, 54, 66, 80, 98, 119]
    tc_err = {}
    plug_err = {}
    for n in grid:
        tc_vals, plug_vals = [], []
        for run in range(runs):
            X, Y = gen_fragmented_hypercube(n, d, seed=1000 * run + n)
            res = transport_cluster(X, Y, None, TcConfig(rank=K, seed=run))
            tc_vals.append(abs(w2_estimate(res.plan, X, Y) - 8.0))
            cost = SqEuclideanCost(X.points, Y.points)
            plug = assignment_cost(cost, exact_assignment(cost))
            plug_vals.append(abs(plug - 8.0))
        tc_err[n] = float(np.mean(tc_vals))
        plug_err[n] = float(np.mean(plug_vals))
    elapsed = time.time() - t0
    ok = (
        tc_err[119] <= 1.0
        and plug_err[119] >= 8.0
        and all(tc_err[n] < plug_err[n] for n in grid)
        and elapsed < 180
    )
    _report(
        3,
        ok,
        f"n=119: TC error {tc_err[119]:.3f} (<=1.0), plug-in {plug_err[119]:.3f} (>=8); "
        f"TC < plug-in at every n; {elapsed:.1f}s (< 180s)",
    )


# -------------------------------------------------------------------- 4 ----


def test_criterion_4_descent_and_gradient():
    bad_traces = 0
    bad_chain = 0
    for t in range(100):
        rng = substream(404, f"inst-{t}")
        n = int(rng.integers(8, 65))
        K = int(rng.integers(2, min(9, n)))
        X = rng.normal(size=(n, 2))
        Y = rng.normal(size=(n, 2))
        cfg = TcConfig(rank=K, seed=t)
        res = transport_cluster(X, Y, None, cfg)
        hist = res.cost_history
        if any(b > a + 1e-12 for a, b in zip(hist, hist[1:])):
            bad_traces += 1
        # independent registered-initialization cost
        cost = SqEuclideanCost(X, Y)
        sigma = exact_assignment(cost)
        Q0 = registered_init(X, Y, cost, sigma, K, cfg.resolve_kmeans())
        assign = HardAssignment(Q0.argmax(axis=1), uniform(n))
        Qh, _ = hard_to_factor(assign, K)
        init_plan = plan_from_hard(assign, sigma.permute_rows_t(Qh), K)
        if res.cost > lrot_cost(cost, init_plan) + 1e-9:
            bad_chain += 1
    grad_fail = 0
    for t in range(40):
        rng = substream(405, f"grad-{t}")
        n, K = int(rng.integers(4, 11)), int(rng.integers(2, 4))
        C = as_cost(rng.normal(size=(n, n)))
        Q = rng.random((n, K)) + 0.2
        Q *= (uniform(n) / Q.sum(axis=1))[:, None]
        grad = gkms_gradient(C, Q)
        h = 1e-6
        for _ in range(3):
            V = rng.normal(size=(n, K))
            V -= V.mean(axis=1, keepdims=True)
            num = (gen_kmeans_cost(C, Q + h * V) - gen_kmeans_cost(C, Q - h * V)) / (2 * h)
            ana = float((grad * V).sum())
            if abs(ana - num) > 1e-5 * max(1.0, abs(num)):
                grad_fail += 1
    _report(
        4,
        bad_traces == 0 and bad_chain == 0 and grad_fail == 0,
        f"monotone traces (bad={bad_traces}), final <= registered init "
        f"(bad={bad_chain}) over 100 instances; gradient matches finite "
        f"differences to 1e-5 (bad={grad_fail})",
    )


# -------------------------------------------------------------------- 5 ----


def test_criterion_5_equivalence_identities():
    worst = 0.0
    for t in range(50):
        rng = substream(505, f"idy-{t}")
        n = int(rng.integers(4, 12))
        K = int(rng.integers(2, 4))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        Y = rng.normal(size=(n, d))
        labels = rng.integers(0, K, size=n)
        labels[:K] = np.arange(K)
        assign = HardAssignment(labels, uniform(n))

        # mean form vs pairwise form of the distortion
        worst = max(worst, abs(kmeans_distortion(X, assign) - pairwise_distortion(X, assign)))

        # n * clustering cost on the half squared-Euclidean self-cost equals
        # the K-means distortion
        C_half = as_cost(0.5 * ((X[:, None] - X[None, :]) ** 2).sum(-1))
        Q, _ = hard_to_factor(assign, K)
        worst = max(
            worst,
            abs(n * gen_kmeans_cost(C_half, Q) - kmeans_distortion(X, assign)),
        )

        # bipartition decomposition: two distortions plus centroid separation
        C_xy = ((X[:, None] - Y[None, :]) ** 2).sum(-1)
        part = partition_pair_cost(C_xy, labels, labels)
        decomp = kmeans_distortion(X, assign) + kmeans_distortion(Y, assign)
        for k in range(K):
            members = labels == k
            mu_x = X[members].mean(axis=0)
            mu_y = Y[members].mean(axis=0)
            decomp += members.sum() * float(((mu_x - mu_y) ** 2).sum())
        worst = max(worst, abs(part - decomp))

        # reparameterization identity through a random permutation
        sigma = exact_assignment(as_cost(rng.random((n, n))))
        C = rng.random((n, n))
        lhs = gen_kmeans_cost(monge_register(as_cost(C), sigma), Q)
        R = sigma.permute_rows_t(Q)
        g = Q.sum(axis=0)
        rhs = float(np.sum(C * ((Q / g) @ R.T)))
        worst = max(worst, abs(lhs - rhs))

        # skew invariance and affine offsets
        Qs = rng.random((n, K)) + 0.2
        Qs *= (uniform(n) / Qs.sum(axis=1))[:, None]
        S = 0.5 * (C + C.T)
        worst = max(worst, abs(gen_kmeans_cost(as_cost(C), Qs) - gen_kmeans_cost(as_cost(S), Qs)))
        f = rng.normal(size=n)
        h = rng.normal(size=n)
        gam = float(rng.normal())
        shifted = C + np.outer(f, np.ones(n)) + np.outer(np.ones(n), h) + gam
        delta = gen_kmeans_cost(as_cost(shifted), Qs) - gen_kmeans_cost(as_cost(C), Qs)
        u = uniform(n)
        worst = max(worst, abs(delta - (f @ u + u @ h + gam)))
    _report(5, worst <= 1e-9, f"max identity residual {worst:.3e} (<= 1e-9)")


# -------------------------------------------------------------------- 6 ----


def test_criterion_6_feasibility_fuzz():
    bad = 0
    checked = 0
    for t in range(50):
        rng = substream(606, f"fuzz-{t}")
        kantorovich = t % 2 == 1
        n = int(rng.integers(8, 40))
        m = int(rng.integers(6, 40)) if kantorovich else n
        K = int(rng.integers(1, min(7, min(n, m) + 1)))
        X = rng.normal(size=(n, 2))
        Y = rng.normal(size=(m, 2))
        cost = SqEuclideanCost(X, Y)
        cfg = TcConfig(
            rank=K,
            seed=t,
            blend_lambda=float(rng.uniform(0.2, 0.9)),
            solver=["gkms", "auto"][t % 2],
            registration="kantorovich" if kantorovich else "monge",
            sinkhorn=SinkhornConfig(epsilon=5e-3 * cost.median(), tolerance=1e-7),
        )
        if kantorovich:
            a = rng.random(n) + 0.5
            a /= a.sum()
            b = rng.random(m) + 0.5
            b /= b.sum()
            res = transport_cluster_kantorovich(X, Y, a, b, cost, cfg)
            want_a, want_b = a, b
        else:
            res = transport_cluster(X, Y, cost, cfg)
            want_a, want_b = uniform(n), uniform(m)
        plan = res.plan  # LowRankPlan construction enforces the invariants
        P = assemble_plan(plan).matrix
        checked += 1
        if (
            np.abs(P.sum(axis=1) - want_a).max() > 1e-6
            or np.abs(P.sum(axis=0) - want_b).max() > 1e-6
            or np.any(plan.g <= 0)
        ):
            bad += 1
    _report(6, bad == 0 and checked == 50, f"{checked} fuzz configurations, {bad} infeasible plans")


# -------------------------------------------------------------------- 7 ----


def test_criterion_7_solver_cross_checks():
    # exact assignment equals full enumeration for n <= 7
    enum_bad = 0
    for n in range(2, 8):
        for t in range(3):
            rng = substream(707, f"enum-{n}-{t}")
            C = rng.random((n, n))
            sigma = exact_assignment(as_cost(C))
            best, best_sigma = np.inf, None
            for perm in itertools.permutations(range(n)):
                total = sum(C[i, perm[i]] for i in range(n))
                if total < best - 1e-15:
                    best, best_sigma = total, perm
            if not np.array_equal(sigma.sigma, best_sigma):
                enum_bad += 1
    # sinkhorn at eps = 1e-4 * median recovers the optimal permutation
    extract_bad = 0
    for t in range(50):
        rng = substream(708, f"ext-{t}")
        X = rng.normal(size=(32, 2))
        Y = rng.normal(size=(32, 2))
        cost = SqEuclideanCost(X, Y)
        eps = 1e-4 * cost.median()
        res = sinkhorn(cost, uniform(32), uniform(32),
                       SinkhornConfig(epsilon=eps, tolerance=1e-4, max_iters=20_000))
        if not np.array_equal(
            extract_permutation(res.coupling).sigma, exact_assignment(cost).sigma
        ):
            extract_bad += 1
    _report(
        7,
        enum_bad == 0 and extract_bad == 0,
        f"assignment vs n! enumeration mismatches: {enum_bad}; "
        f"sinkhorn extraction mismatches: {extract_bad}/50",
    )


# -------------------------------------------------------------------- 8 ----


def test_criterion_8_direction_of_effects():
    # (a) epsilon sensitivity on interleaving moons vs circle Gaussians
    X, Y = gen_moons_gaussians(1024, 0.25, seed=5)
    cost = SqEuclideanCost(X.points, Y.points)
    med = cost.median()
    sweep = {}
    for eps_rel in (1e-5, 1e-1):
        cfg = TcConfig(
            rank=10, seed=2, registration="kantorovich",
            sinkhorn=SinkhornConfig(epsilon=eps_rel * med, tolerance=1e-3, max_iters=2000),
        )
        res = transport_cluster_kantorovich(X.points, Y.points, None, None, cost, cfg)
        sweep[eps_rel] = res.cost
    ok_eps = sweep[1e-5] < sweep[1e-1]

    # (b) registered initialization beats a random one on shifted Gaussians
    Xg, Yg, labels = gen_shifted_gaussians(512, 16, 0.1, seed=11)
    res_reg = transport_cluster(Xg, Yg, None, TcConfig(rank=16, seed=1))
    res_rand = transport_cluster(Xg, Yg, None, TcConfig(rank=16, seed=1, init="random"))
    ok_init = res_reg.cost <= res_rand.cost

    # (c) planted labels recovered at the true rank
    ari_val = ari(res_reg.plan.Q.argmax(axis=1), labels)
    ok_ari = ari_val >= 0.95
    _report(
        8,
        ok_eps and ok_init and ok_ari,
        f"cost(eps=1e-5)={sweep[1e-5]:.3f} < cost(eps=1e-1)={sweep[1e-1]:.3f}; "
        f"registered {res_reg.cost:.4f} <= random {res_rand.cost:.4f}; "
        f"planted ARI {ari_val:.3f} (>= 0.95)",
    )
