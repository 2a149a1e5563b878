"""Generalized K-means solvers on a registered cost.

The objective over a single factor Q with fixed row marginal a is

    F(Q) = <C~, Q diag(1/Q.T 1) Q.T>_F.

GKMS minimizes F by mirror descent under the entropy mirror map: each step is
an exponentiated-gradient update followed by a one-sided (row) Sinkhorn
projection and a floor restoring strict positivity. For registered costs
whose symmetrization is conditionally negative semidefinite the problem
reduces exactly to kernel K-means, handled by :func:`kernel_reduce`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import KMeansConfig, kmeans
from .core import (
    CostSpec,
    HardAssignment,
    StepFailureError,
    as_cost,
    check_prob_vector,
)

_MAX_HALVINGS = 20


@dataclass(frozen=True)
class GkmsConfig:
    """Mirror-descent settings.

    ``g_floor=None`` resolves to 1e-3/K at solve time. ``stop_tol`` is the
    relative cost change, measured over a window of ``stop_window`` steps,
    below which the solve stops early; set it to 0 to run a fixed number of
    iterations. ``seed`` is carried for config plumbing; the solver itself
    draws no randomness.
    """

    step_size: float = 2.0
    max_iters: int = 250
    g_floor: float | None = None
    entry_floor: float = 1e-12
    monotone_guard: bool = True
    seed: int = 0
    stop_tol: float = 1e-10
    stop_window: int = 10

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.entry_floor <= 0:
            raise ValueError("entry_floor must be positive")

    def resolve_g_floor(self, K: int) -> float:
        floor = 1e-3 / K if self.g_floor is None else self.g_floor
        if floor <= 0 or floor * K > 1.0 + 1e-12:
            raise ValueError(f"g_floor {floor} infeasible for K={K}")
        return floor


@dataclass(frozen=True)
class GkmsState:
    Q: np.ndarray
    iterate_cost: float
    iteration: int


def gen_kmeans_cost(cost_registered: CostSpec, Q: np.ndarray, a=None) -> float:
    """F(Q) = <C~, Q diag(1/Q.T 1) Q.T>, evaluated through the factors."""
    cost = as_cost(cost_registered)
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or cost.shape != (Q.shape[0], Q.shape[0]):
        raise ValueError(f"cost {cost.shape} and factor {Q.shape} do not agree")
    if a is not None:
        a = check_prob_vector(a, name="a")
        if np.abs(Q.sum(axis=1) - a).max() > 1e-6:
            raise ValueError("Q does not have row marginal a")
    g = Q.sum(axis=0)
    if np.any(g <= 0):
        raise ZeroDivisionError("collapsed cluster: inner marginal has a zero entry")
    W = cost.apply(Q)
    return float(np.sum(Q * W / g))


def gkms_gradient(cost_registered: CostSpec, Q: np.ndarray) -> np.ndarray:
    """Gradient of :func:`gen_kmeans_cost` at Q.

    With S the symmetrization of the registered cost and D = diag(Q.T 1),

        grad F = 2 S Q D^{-1} - 1 diagvec(D^{-1} Q.T S Q D^{-1}).T,

    pinned against tangent-space finite differences of the cost.
    """
    cost = as_cost(cost_registered)
    Q = np.asarray(Q, dtype=float)
    g = Q.sum(axis=0)
    if np.any(g <= 0):
        raise ZeroDivisionError("singular inner marginal")
    W = Q / g  # Q D^{-1}
    SW = 0.5 * (cost.apply(W) + cost.apply_t(W))
    quad = np.einsum("ik,ik->k", W, SW)  # diag of D^{-1} Q.T S Q D^{-1}
    return 2.0 * SW - quad[None, :]


def _row_project(K_mat: np.ndarray, a: np.ndarray) -> np.ndarray:
    return (a / K_mat.sum(axis=1))[:, None] * K_mat


def _apply_floors(Q, a, g_floor, entry_floor):
    """Blend toward the uniform feasible matrix until the floors hold.

    Uses the smallest mixing weight restoring g >= g_floor and entrywise
    Q >= entry_floor; mixing with a u_K' preserves the row marginal.
    """
    K = Q.shape[1]
    g = Q.sum(axis=0)
    lam = 0.0
    gmin = g.min()
    if gmin < g_floor:
        lam = max(lam, (g_floor - gmin) / (1.0 / K - gmin))
    ref = np.broadcast_to(a[:, None] / K, Q.shape)
    bad = Q < entry_floor
    if np.any(bad):
        with np.errstate(divide="ignore", invalid="ignore"):
            need = (entry_floor - Q[bad]) / (ref[bad] - Q[bad])
        need = need[np.isfinite(need) & (need > 0)]
        if need.size:
            lam = max(lam, float(need.max()))
    if lam <= 0:
        return Q
    lam = min(lam, 1.0)
    return (1.0 - lam) * Q + lam * ref


def gkms_step(state: GkmsState, cost_registered: CostSpec, cfg: GkmsConfig) -> GkmsState:
    """One exponentiated-gradient step with row projection and flooring.

    The multiplicative kernel Q * exp(-gamma grad F) is formed in the log
    domain with a per-row shift, which the row projection cancels exactly.
    With the monotone guard, a step that raises the cost is retried with a
    halved step size; StepFailureError after 20 halvings signals
    stationarity and is treated as convergence by the solver.
    """
    cost = as_cost(cost_registered)
    Q = state.Q
    a = Q.sum(axis=1)
    K = Q.shape[1]
    g_floor = cfg.resolve_g_floor(K)
    grad = gkms_gradient(cost, Q)
    logQ = np.log(Q)

    gamma = cfg.step_size
    for _ in range(_MAX_HALVINGS + 1):
        L = logQ - gamma * grad
        L -= L.max(axis=1, keepdims=True)
        cand = _apply_floors(_row_project(np.exp(L), a), a, g_floor, cfg.entry_floor)
        cand_cost = gen_kmeans_cost(cost, cand)
        if not cfg.monotone_guard or cand_cost <= state.iterate_cost:
            return GkmsState(cand, cand_cost, state.iteration + 1)
        gamma *= 0.5
    raise StepFailureError(
        f"no descent after {_MAX_HALVINGS} step-size halvings "
        f"(cost {state.iterate_cost:.6e})"
    )


def gkms_solve(
    cost_registered: CostSpec, Q0: np.ndarray, cfg: GkmsConfig = GkmsConfig()
) -> tuple[np.ndarray, list[float]]:
    """Iterate :func:`gkms_step` from a strictly positive feasible Q0.

    Returns the final soft factor and the full cost trace (initial cost
    first). Stops after max_iters, at stationarity, or when the relative
    cost change over ``stop_window`` steps falls below ``stop_tol``.
    """
    cost = as_cost(cost_registered)
    Q0 = np.asarray(Q0, dtype=float)
    if np.any(Q0 <= 0):
        raise ValueError("Q0 must be strictly positive; blend hard inits first")
    a = Q0.sum(axis=1)
    g_floor = cfg.resolve_g_floor(Q0.shape[1])
    Q0 = _apply_floors(Q0, a, g_floor, cfg.entry_floor)
    state = GkmsState(Q0, gen_kmeans_cost(cost, Q0), 0)
    history = [state.iterate_cost]
    for _ in range(cfg.max_iters):
        try:
            state = gkms_step(state, cost, cfg)
        except StepFailureError:
            break
        history.append(state.iterate_cost)
        w = cfg.stop_window
        if cfg.stop_tol > 0 and len(history) > w:
            ref = history[-w - 1]
            if abs(ref - history[-1]) <= cfg.stop_tol * max(abs(ref), 1e-300):
                break
    return state.Q, history


def hard_polish(
    cost_registered: CostSpec, labels: np.ndarray, K: int, *, max_sweeps: int = 30
) -> np.ndarray:
    """Greedy single-point descent on the hard clustering objective.

    Repeatedly moves one point to the cluster giving the largest decrease of
    sum_k block_sum_k / |C_k| until no improving move exists. The analogue of
    Lloyd refinement for an arbitrary registered cost; never increases the
    objective, so initialization guarantees survive it. Moves that would
    empty a cluster are skipped. Deterministic.
    """
    cost = as_cost(cost_registered)
    n, m = cost.shape
    if n != m:
        raise ValueError("polish needs a square registered cost")
    labels = np.array(labels, dtype=np.int64)
    if labels.size != n or labels.max() >= K or labels.min() < 0:
        raise ValueError("labels out of range")
    diag = cost.pairs(np.arange(n), np.arange(n))
    M = np.zeros((n, K))
    M[np.arange(n), labels] = 1.0
    W = 0.5 * (cost.apply(M) + cost.apply_t(M))  # W[i, c] = sum_{j in C_c} S[i, j]
    sizes = M.sum(axis=0)
    bs = np.einsum("ik,ik->k", M, W)  # symmetric block sums
    for _ in range(max_sweeps):
        moved = False
        for i in range(n):
            a = labels[i]
            if sizes[a] <= 1:
                continue
            old_a = bs[a] / sizes[a]
            new_a = (bs[a] - 2.0 * W[i, a] + diag[i]) / (sizes[a] - 1.0)
            delta = (bs + 2.0 * W[i] + diag[i]) / (sizes + 1.0) - bs / sizes
            delta += new_a - old_a
            delta[a] = 0.0
            c = int(delta.argmin())
            if delta[c] < -1e-12 * max(1.0, abs(old_a)):
                e_i = np.zeros((n, 1))
                e_i[i] = 1.0
                s_col = 0.5 * (cost.apply(e_i) + cost.apply_t(e_i)).ravel()
                bs[a] -= 2.0 * W[i, a] - diag[i]
                bs[c] += 2.0 * W[i, c] + diag[i]
                W[:, a] -= s_col
                W[:, c] += s_col
                sizes[a] -= 1.0
                sizes[c] += 1.0
                labels[i] = c
                moved = True
        if not moved:
            break
    return labels


def round_to_hard(Q: np.ndarray, a) -> HardAssignment:
    """Argmax rounding of a soft factor; ties go to the lowest cluster."""
    Q = np.asarray(Q, dtype=float)
    a = check_prob_vector(a, name="a")
    if Q.shape[0] != a.size:
        raise ValueError("Q and a lengths disagree")
    return HardAssignment(Q.argmax(axis=1), a)


def kernel_reduce(
    cost_registered: CostSpec, K: int, cfg: KMeansConfig | None = None
) -> tuple[HardAssignment, float]:
    """Exact reduction to K-means through the double-centered Gram matrix.

    Symmetrizes the registered cost, forms G = -(1/2) J S J, clips any
    negative spectrum (recording the clipped fraction as ``psd_defect``),
    embeds points from the eigendecomposition, and clusters them. A defect
    near zero certifies the reduction is exact; larger defects mean the cost
    is not conditionally negative semidefinite and callers should fall back
    to the mirror-descent solver.
    """
    cost = as_cost(cost_registered)
    n, m = cost.shape
    if n != m:
        raise ValueError("kernel reduction needs a square registered cost")
    S = cost.materialize()
    S = 0.5 * (S + S.T)
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    G = -0.5 * (J @ S @ J)
    G = 0.5 * (G + G.T)
    evals, evecs = np.linalg.eigh(G)
    total = np.abs(evals).sum()
    defect = float(np.abs(evals[evals < 0]).sum() / total) if total > 0 else 0.0
    clipped = np.maximum(evals, 0.0)
    Z = evecs * np.sqrt(clipped)[None, :]
    if cfg is None:
        cfg = KMeansConfig(K=K)
    elif cfg.K != K:
        raise ValueError(f"cfg.K={cfg.K} disagrees with K={K}")
    assign, _, _ = kmeans(Z, cfg)
    return assign, defect
