"""Transport registration of the cost matrix.

Registration right-multiplies the cost by the transpose of a full-rank plan
(a permutation, or a scaled coupling for soft plans) so that the low-rank
transport problem collapses to a clustering problem over a single factor.
Factored cost representations are preserved whenever the algebra permits;
dense fallback is explicit, never implicit.
"""

from __future__ import annotations

import numpy as np

from .core import (
    CostSpec,
    Coupling,
    DenseCost,
    FactoredCost,
    FeasibilityError,
    Permutation,
    SqEuclideanCost,
    as_cost,
    check_prob_vector,
)


def monge_register(cost: CostSpec, sigma: Permutation) -> CostSpec:
    """Registered cost C~ = C P_sigma.T, i.e. C~[i, j] = C[i, sigma[j]].

    Point-cloud costs stay factored: permuting the columns of the cost is
    the same as permuting the second point set.
    """
    cost = as_cost(cost)
    n, m = cost.shape
    if n != m or m != len(sigma):
        raise ValueError(f"cost is {n}x{m} but sigma has length {len(sigma)}")
    if isinstance(cost, SqEuclideanCost):
        return SqEuclideanCost(cost.X, cost.Y[sigma.sigma])
    if isinstance(cost, FactoredCost):
        return FactoredCost(cost.A, cost.B[sigma.sigma])
    return DenseCost(cost.materialize()[:, sigma.sigma])


def kantorovich_register(
    cost: CostSpec, plan: Coupling, a, *, side: str = "q"
) -> CostSpec:
    """Registered cost for soft plans: C P.T diag(1/a), an n x n object.

    ``side="q"`` registers on the first dataset (solve for Q with row
    marginal a); ``side="r"`` is the symmetric variant C.T P diag(1/b) for
    solving on the second dataset.
    """
    if side == "r":
        return kantorovich_register(
            as_cost(cost).transpose(),
            Coupling(plan.matrix.T, plan.col_marginal, plan.row_marginal),
            plan.col_marginal,
            side="q",
        )
    if side != "q":
        raise ValueError(f"side must be 'q' or 'r', got {side!r}")
    cost = as_cost(cost)
    a = check_prob_vector(a, name="a")
    if np.any(a == 0):
        raise FeasibilityError("registration divides by a; zero entries not allowed")
    if cost.shape != plan.shape or plan.shape[0] != a.size:
        raise ValueError(
            f"shapes disagree: cost {cost.shape}, plan {plan.shape}, a {a.size}"
        )
    P = plan.matrix
    if isinstance(cost, SqEuclideanCost):
        # ||x_i - y_j||^2 P.T diag(1/a) splits into three rank-blocks; the
        # squared-norm row term survives unchanged because P.T 1 = a.
        x2 = np.einsum("ij,ij->i", cost.X, cost.X)
        y2 = np.einsum("ij,ij->i", cost.Y, cost.Y)
        n = cost.X.shape[0]
        ones = np.ones(n)
        h = (P @ y2) / a
        Yt = (P @ cost.Y) / a[:, None]
        A = np.hstack([x2[:, None], ones[:, None], cost.X])
        B = np.hstack([ones[:, None], h[:, None], -2.0 * Yt])
        return FactoredCost(A, B)
    if isinstance(cost, FactoredCost):
        return FactoredCost(cost.A, (P @ cost.B) / a[:, None])
    return DenseCost((cost.materialize() @ P.T) / a[None, :])


def recover_second_factor(plan: Coupling, a, Q: np.ndarray) -> np.ndarray:
    """Conjugate the first factor through the plan: R = P.T diag(1/a) Q.

    The output satisfies R @ 1 = b and R.T @ 1 = Q.T @ 1, making (Q, R, g)
    feasible; residuals beyond 1e-5 signal an inconsistent coupling and
    raise FeasibilityError.
    """
    a = check_prob_vector(a, name="a")
    Q = np.asarray(Q, dtype=float)
    if Q.shape[0] != a.size or plan.shape[0] != a.size:
        raise ValueError("row dimension of Q, a, and the plan must agree")
    if np.any(a == 0):
        raise FeasibilityError("conjugation divides by a; zero entries not allowed")
    if np.abs(Q.sum(axis=1) - a).max() > 1e-5:
        raise FeasibilityError("Q does not have row marginal a")
    R = plan.matrix.T @ (Q / a[:, None])
    db = np.abs(R.sum(axis=1) - plan.col_marginal).max()
    dg = np.abs(R.sum(axis=0) - Q.sum(axis=0)).max()
    if db > 1e-5 or dg > 1e-5:
        raise FeasibilityError(
            f"conjugated factor violates feasibility (outer {db:.3e}, inner {dg:.3e})"
        )
    return R
