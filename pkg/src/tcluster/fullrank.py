"""Full-rank optimal transport solvers used for the registration step.

Provides entropic Sinkhorn with exact-marginal rounding, exact minimum-cost
assignment for square uniform problems, and extraction of a permutation from
a near-optimal coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    CostSpec,
    Coupling,
    ConvergenceError,
    FeasibilityError,
    Permutation,
    as_cost,
    check_prob_vector,
)

# Exact lexicographic tie-breaking re-solves reduced assignment problems and
# is only affordable on small instances; above this size the deterministic
# Jonker-Volgenant output is returned as-is.
LEX_REFINE_MAX = 64


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropic regularization settings.

    epsilon is in cost units. With ``anneal`` the solver warm-starts the dual
    potentials along a geometric epsilon schedule, which is what makes the
    small-epsilon regime (epsilon far below the median cost) tractable.
    """

    epsilon: float = 1e-5
    max_iters: int = 10_000
    tolerance: float = 1e-6
    log_domain: bool = True
    anneal: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class SinkhornResult:
    coupling: Coupling
    iterations: int
    residual: float


def _round_to_marginals(P, a, b):
    """Repair a near-feasible plan to exact marginals in one pass.

    Rescales rows then columns down to their targets and distributes the
    remaining deficit mass as a rank-one correction.
    """
    r = P.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > 0, np.minimum(a / r, 1.0), 1.0)
    P = P * scale[:, None]
    c = P.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(c > 0, np.minimum(b / c, 1.0), 1.0)
    P = P * scale[None, :]
    ea = a - P.sum(axis=1)
    eb = b - P.sum(axis=0)
    s = ea.sum()
    if s > 0:
        P = P + np.outer(ea, eb) / s
    return np.maximum(P, 0.0)


def _residual(P, a, b):
    return max(np.abs(P.sum(axis=1) - a).max(), np.abs(P.sum(axis=0) - b).max())


def _log_plan(C, f, g, eps):
    return np.exp((f[:, None] + g[None, :] - C) / eps)


def _row_residual(C, f, g, eps, a, buf):
    np.add(f[:, None], g[None, :], out=buf)
    buf -= C
    buf /= eps
    np.exp(buf, out=buf)
    return float(np.abs(buf.sum(axis=1) - a).max())


def _sinkhorn_log(C, a, b, eps, f, g, max_iters, tol, buf, check_every=4):
    """Log-domain iterations; returns (f, g, iterations, residual).

    Column sums are exact after each g-update, so only the row residual is
    monitored, and only every ``check_every`` iterations; all n x m work
    happens in the caller-provided buffer.
    """
    loga = np.log(a)
    logb = np.log(b)
    res = np.inf
    it = 0
    while it < max_iters:
        it += 1
        np.subtract(g[None, :], C, out=buf)
        buf /= eps
        m = buf.max(axis=1)
        buf -= m[:, None]
        np.exp(buf, out=buf)
        f = eps * (loga - m - np.log(buf.sum(axis=1)))
        np.subtract(f[:, None], C, out=buf)
        buf /= eps
        m = buf.max(axis=0)
        buf -= m[None, :]
        np.exp(buf, out=buf)
        g = eps * (logb - m - np.log(buf.sum(axis=0)))
        if it % check_every == 0 or it == max_iters:
            res = _row_residual(C, f, g, eps, a, buf)
            if res <= tol:
                break
    if not np.isfinite(res):
        res = _row_residual(C, f, g, eps, a, buf)
    return f, g, it, res


def _sinkhorn_scaling(C, a, b, eps, max_iters, tol):
    K = np.exp(-C / eps)
    u = np.ones_like(a)
    v = np.ones_like(b)
    guard = 1e-300
    res = np.inf
    it = 0
    while it < max_iters:
        it += 1
        u = a / (K @ v + guard)
        v = b / (K.T @ u + guard)
        P = u[:, None] * K * v[None, :]
        res = np.abs(P.sum(axis=1) - a).max()
        if res <= tol:
            break
    return u[:, None] * K * v[None, :], it, res


def sinkhorn(cost: CostSpec, a, b, cfg: SinkhornConfig = SinkhornConfig()) -> SinkhornResult:
    """Entropic OT followed by an exact-marginal rounding step.

    Returns a feasible coupling whose pre-rounding marginal residual is at
    most ``cfg.tolerance`` when the iterations converge. Raises
    ConvergenceError if the budget is exhausted with residual above
    ``10 * cfg.tolerance``. Deterministic.
    """
    cost = as_cost(cost)
    a = check_prob_vector(a, name="a")
    b = check_prob_vector(b, name="b")
    if cost.shape != (a.size, b.size):
        raise ValueError(f"cost shape {cost.shape} does not match marginals")
    if np.any(a == 0) or np.any(b == 0):
        raise FeasibilityError("sinkhorn requires strictly positive marginals")
    C = cost.materialize()

    if not cfg.log_domain:
        P, it, res = _sinkhorn_scaling(C, a, b, cfg.epsilon, cfg.max_iters, cfg.tolerance)
    else:
        f = np.zeros(a.size)
        g = np.zeros(b.size)
        buf = np.empty_like(C)
        it = 0
        if cfg.anneal:
            # geometric cooling from the median cost down to the target; the
            # warm-up levels only place the duals, a few iterations each
            level = max(float(np.median(C)), cfg.epsilon)
            levels = []
            while level > cfg.epsilon * 2:
                levels.append(level)
                level /= 2.0
            for eps_t in levels:
                budget = min(10, max(0, cfg.max_iters - it))
                if budget == 0:
                    break
                f, g, used, _ = _sinkhorn_log(
                    C, a, b, eps_t, f, g, budget, 0.0, buf, check_every=budget + 1
                )
                it += used
        f, g, used, res = _sinkhorn_log(
            C, a, b, cfg.epsilon, f, g, max(1, cfg.max_iters - it), cfg.tolerance, buf
        )
        it += used
        P = _log_plan(C, f, g, cfg.epsilon)

    if res > 10 * cfg.tolerance:
        raise ConvergenceError(
            f"sinkhorn stopped after {it} iterations with residual {res:.3e} "
            f"(target {cfg.tolerance:.1e})",
            residual=float(res),
            iterations=it,
        )
    P = _round_to_marginals(P, a, b)
    return SinkhornResult(Coupling(P, a, b), it, float(res))


def _lex_smallest(C, sigma0, best):
    """Lexicographically smallest permutation among minimum-cost ones.

    Fixes rows greedily; each candidate column is accepted iff the reduced
    problem still completes to the optimal total.
    """
    n = C.shape[0]
    tol = 1e-12 * (1.0 + abs(best))
    cur = np.array(sigma0)
    free = np.ones(n, dtype=bool)
    prefix = 0.0
    for i in range(n):
        for j in np.flatnonzero(free[: cur[i]]):
            free[j] = False
            sub_cols = np.flatnonzero(free)
            if i + 1 < n:
                sub = C[i + 1 :, sub_cols]
                rr, cc = linear_sum_assignment(sub)
                completion = float(sub[rr, cc].sum())
            else:
                cc = np.empty(0, dtype=int)
                completion = 0.0
            free[j] = True
            if prefix + C[i, j] + completion <= best + tol:
                cur[i] = j
                cur[i + 1 :] = sub_cols[cc]
                break
        prefix += C[i, cur[i]]
        free[cur[i]] = False
    return cur


def exact_assignment(cost: CostSpec, *, lexicographic: bool | None = None) -> Permutation:
    """Minimum-cost permutation for a square cost (Jonker-Volgenant, O(n^3)).

    Ties are broken toward the lexicographically smallest sigma; the exact
    tie-breaking pass is skipped above LEX_REFINE_MAX rows unless forced.
    """
    cost = as_cost(cost)
    n, m = cost.shape
    if n != m:
        raise ValueError(f"assignment needs a square cost, got {n}x{m}")
    C = cost.materialize()
    rows, cols = linear_sum_assignment(C)
    sigma = cols[np.argsort(rows)]
    if lexicographic is None:
        lexicographic = n <= LEX_REFINE_MAX
    if lexicographic and n > 1:
        sigma = _lex_smallest(C, sigma, float(C[np.arange(n), sigma].sum()))
    return Permutation(sigma)


def assignment_cost(cost: CostSpec, sigma: Permutation) -> float:
    """Cost of the coupling (1/n) P_sigma, in transport-plan units."""
    cost = as_cost(cost)
    n = len(sigma)
    return float(cost.pairs(np.arange(n), sigma.sigma).sum() / n)


def extract_permutation(coupling: Coupling) -> Permutation:
    """Permutation concentrating the most coupling mass (max-weight matching).

    Runs the exact assignment on -log(P + eta); a matching, unlike a row
    argmax, is guaranteed to be a bijection even at moderate epsilon.
    """
    n, m = coupling.shape
    if n != m:
        raise ValueError(f"permutation extraction needs a square coupling, got {n}x{m}")
    W = -np.log(coupling.matrix + 1e-300)
    return exact_assignment(as_cost(W))
