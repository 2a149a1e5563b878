"""End-to-end transport clustering.

Step 1 solves the full-rank transport problem (exact matching at desk scale,
entropic Sinkhorn plus matching extraction above it). Step 2 registers the
cost with the resulting plan and solves generalized K-means from a
transport-registered, centered initialization. The second low-rank factor is
recovered from the first through the registering plan, so the output triple
is feasible by construction.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .clustering import KMeansConfig, kmeans
from .core import (
    Coupling,
    CostSpec,
    EmptyClusterWarning,
    HardAssignment,
    LowRankPlan,
    Permutation,
    SqEuclideanCost,
    as_cost,
    as_points,
    check_prob_vector,
    hard_to_factor,
    lrot_cost,
    plan_from_hard,
    full_cost,
    uniform,
)
from .fullrank import (
    SinkhornConfig,
    assignment_cost,
    exact_assignment,
    extract_permutation,
    sinkhorn,
)
from .genkmeans import (
    GkmsConfig,
    gen_kmeans_cost,
    gkms_solve,
    hard_polish,
    kernel_reduce,
    round_to_hard,
)
from .registration import kantorovich_register, monge_register, recover_second_factor
from .rng import subseed, substream

# beyond this size the matching in step 1 comes from Sinkhorn + extraction
EXACT_ASSIGNMENT_MAX = 2048

# kernel reduction is trusted as the solver when the clipped spectrum
# fraction stays below this
PSD_DEFECT_MAX = 1e-8


@dataclass(frozen=True)
class TcConfig:
    rank: int
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    gkms: GkmsConfig = field(default_factory=GkmsConfig)
    kmeans: KMeansConfig | None = None  # defaults to K=rank with derived seed
    blend_lambda: float = 0.5
    registration: str = "monge"
    solver: str = "gkms"
    init: str = "registered"
    seed: int = 0
    exact_threshold: int = EXACT_ASSIGNMENT_MAX
    polish_sweeps: int = 30  # hard local-search refinement after rounding; 0 disables

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if not 0.0 <= self.blend_lambda <= 1.0:
            raise ValueError("blend_lambda must lie in [0, 1]")
        if self.registration not in ("monge", "kantorovich"):
            raise ValueError(f"unknown registration {self.registration!r}")
        if self.solver not in ("gkms", "kernel", "auto"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.init not in ("registered", "random"):
            raise ValueError(f"unknown init {self.init!r}")

    def resolve_kmeans(self) -> KMeansConfig:
        if self.kmeans is None:
            return KMeansConfig(K=self.rank, seed=subseed(self.seed, "kmeans"))
        if self.kmeans.K != self.rank:
            raise ValueError("kmeans.K must equal the plan rank")
        return self.kmeans


@dataclass(frozen=True)
class TcResult:
    plan: LowRankPlan
    sigma: Permutation | Coupling
    cost: float
    gamma: float
    cost_history: list[float]
    timings: dict[str, float]
    psd_defect: float | None = None


def registered_init(X, Y, cost: CostSpec, sigma: Permutation, K: int, cfg: KMeansConfig):
    """Transport-registered initialization: the cheaper of the two clusterings.

    Clusters X and Y independently, carries the Y clustering across the
    matching, and keeps whichever factor has lower registered co-clustering
    cost. Ties keep the X-side factor.
    """
    cost = as_cost(cost)
    n = len(sigma)
    ax, _, _ = kmeans(X, replace(cfg, seed=subseed(cfg.seed, "init-x")))
    ay, _, _ = kmeans(Y, replace(cfg, seed=subseed(cfg.seed, "init-y")))
    Q_x, _ = hard_to_factor(ax, K)
    R_y, _ = hard_to_factor(ay, K)
    registered = monge_register(cost, sigma)
    cand = sigma.permute_rows(R_y)  # P_sigma R_y: row i inherits y_sigma(i)
    if gen_kmeans_cost(registered, Q_x) <= gen_kmeans_cost(registered, cand):
        return Q_x
    return cand


def blend_init(Q_hard: np.ndarray, a, lam: float, seed: int) -> np.ndarray:
    """Center a hard factor: Q0 = lam Q + (1-lam) Q' for random feasible Q'.

    Q' draws each row from a flat Dirichlet scaled by the row mass, so the
    output is row-feasible and, for lam < 1, strictly positive.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    Q_hard = np.asarray(Q_hard, dtype=float)
    a = check_prob_vector(a, name="a")
    rng = substream(seed, "blend-init")
    Qp = rng.dirichlet(np.ones(Q_hard.shape[1]), size=Q_hard.shape[0]) * a[:, None]
    return lam * Q_hard + (1.0 - lam) * Qp


def _hard_plan_and_cost(cost, assign: HardAssignment, sigma: Permutation, K: int):
    Q, _ = _quiet_factor(assign, K)
    R = sigma.permute_rows_t(Q)
    plan = plan_from_hard(assign, R, K)
    return plan, lrot_cost(cost, plan)


def _quiet_factor(assign, K):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyClusterWarning)
        return hard_to_factor(assign, K)


def _polished(registered, assign: HardAssignment, K: int, a, sweeps: int) -> HardAssignment:
    if sweeps <= 0:
        return assign
    labels = hard_polish(registered, assign.labels, K, max_sweeps=sweeps)
    return HardAssignment(labels, a)


def transport_cluster(X, Y, cost: CostSpec | None = None, cfg: TcConfig | None = None) -> TcResult:
    """Low-rank transport between uniform square datasets via clustering.

    Either point clouds (squared-Euclidean cost is implied) or an explicit
    cost can drive the run; without point clouds the initialization falls
    back to the kernel-reduction clustering of the registered cost.
    """
    if cfg is None:
        raise ValueError("a TcConfig is required")
    if cost is None:
        if X is None or Y is None:
            raise ValueError("need either a cost or both point clouds")
        cost = SqEuclideanCost(as_points(X), as_points(Y))
    cost = as_cost(cost)
    n, m = cost.shape
    if n != m:
        raise ValueError("monge-path clustering needs n == m; use the "
                         "kantorovich variant for rectangular problems")
    K = cfg.rank
    if K > n:
        raise ValueError(f"rank {K} exceeds n={n}")
    a = uniform(n)
    timings: dict[str, float] = {}
    t_all = time.perf_counter()

    # step 1: full-rank transport
    t0 = time.perf_counter()
    if n <= cfg.exact_threshold:
        sigma = exact_assignment(cost)
    else:
        res = sinkhorn(cost, a, a, cfg.sinkhorn)
        sigma = extract_permutation(res.coupling)
    fullrank = assignment_cost(cost, sigma)
    timings["fullrank_ms"] = 1e3 * (time.perf_counter() - t0)

    # step 2: register and cluster
    t0 = time.perf_counter()
    registered = monge_register(cost, sigma)
    timings["register_ms"] = 1e3 * (time.perf_counter() - t0)

    if K == 1:
        plan = LowRankPlan(a[:, None], a[:, None], np.array([1.0]))
        cost_val = lrot_cost(cost, plan)
        return TcResult(
            plan, sigma, cost_val, _gamma(fullrank, cost_val), [],
            _finish(timings, t_all),
        )
    if K == n:
        Q = np.diag(a)
        plan = LowRankPlan(Q, sigma.permute_rows_t(Q), a)
        cost_val = lrot_cost(cost, plan)
        return TcResult(
            plan, sigma, cost_val, _gamma(fullrank, cost_val), [],
            _finish(timings, t_all),
        )

    t0 = time.perf_counter()
    km_cfg = cfg.resolve_kmeans()
    defect = None
    init_plan = init_cost = None
    if cfg.init == "random":
        # ablation mode: a random row-feasible start with no registered anchor
        Q0_hard = np.broadcast_to(a[:, None] / K, (n, K)).copy()
    else:
        if X is not None and Y is not None:
            Q0_hard = registered_init(X, Y, cost, sigma, K, km_cfg)
        else:
            assign0, defect = kernel_reduce(registered, K, km_cfg)
            Q0_hard, _ = _quiet_factor(assign0, K)
        init_assign = round_to_hard(Q0_hard, a)
        init_plan, init_cost = _hard_plan_and_cost(cost, init_assign, sigma, K)
    timings["init_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    history: list[float] = []
    solver = cfg.solver
    if solver in ("kernel", "auto"):
        assign_k, defect = kernel_reduce(registered, K, km_cfg)
        if solver == "kernel" or defect <= PSD_DEFECT_MAX:
            assign_k = _polished(registered, assign_k, K, a, cfg.polish_sweeps)
            plan_k, cost_k = _hard_plan_and_cost(cost, assign_k, sigma, K)
            if init_cost is None or cost_k <= init_cost:
                plan, cost_val = plan_k, cost_k
            else:
                plan, cost_val = init_plan, init_cost
            timings["solve_ms"] = 1e3 * (time.perf_counter() - t0)
            return TcResult(
                plan, sigma, cost_val, _gamma(fullrank, cost_val), history,
                _finish(timings, t_all), psd_defect=defect,
            )
        # auto with a real defect falls back to mirror descent
    lam = 0.0 if cfg.init == "random" else cfg.blend_lambda
    Q0 = blend_init(Q0_hard, a, lam, cfg.seed)
    Q_soft, history = gkms_solve(registered, Q0, cfg.gkms)
    assign = _polished(registered, round_to_hard(Q_soft, a), K, a, cfg.polish_sweeps)
    plan_g, cost_g = _hard_plan_and_cost(cost, assign, sigma, K)
    # keep the initialization if rounding lost its guarantee
    if init_cost is None or cost_g <= init_cost:
        plan, cost_val = plan_g, cost_g
    else:
        plan, cost_val = init_plan, init_cost
    timings["solve_ms"] = 1e3 * (time.perf_counter() - t0)
    return TcResult(
        plan, sigma, cost_val, _gamma(fullrank, cost_val), history,
        _finish(timings, t_all), psd_defect=defect,
    )


def transport_cluster_kantorovich(
    X, Y, a=None, b=None, cost: CostSpec | None = None, cfg: TcConfig | None = None
) -> TcResult:
    """Soft-plan variant for arbitrary marginals and rectangular problems.

    Registers with the entropic full-rank plan, solves the soft generalized
    K-means problem for Q with row marginal a, and conjugates through the
    plan for R. The returned Q is soft; callers that need a hard clustering
    round it explicitly.
    """
    if cfg is None:
        raise ValueError("a TcConfig is required")
    if cost is None:
        if X is None or Y is None:
            raise ValueError("need either a cost or both point clouds")
        cost = SqEuclideanCost(as_points(X), as_points(Y))
    cost = as_cost(cost)
    n, m = cost.shape
    a = uniform(n) if a is None else check_prob_vector(a, name="a")
    b = uniform(m) if b is None else check_prob_vector(b, name="b")
    K = cfg.rank
    timings: dict[str, float] = {}
    t_all = time.perf_counter()

    t0 = time.perf_counter()
    res = sinkhorn(cost, a, b, cfg.sinkhorn)
    plan_full = res.coupling
    fullrank = full_cost(cost, plan_full)
    timings["fullrank_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    registered = kantorovich_register(cost, plan_full, a)
    timings["register_ms"] = 1e3 * (time.perf_counter() - t0)

    if K == 1:
        plan = LowRankPlan(a[:, None], b[:, None], np.array([1.0]))
        cost_val = lrot_cost(cost, plan)
        return TcResult(
            plan, plan_full, cost_val, _gamma(fullrank, cost_val), [],
            _finish(timings, t_all),
        )

    t0 = time.perf_counter()
    km_cfg = cfg.resolve_kmeans()
    if cfg.init == "random":
        Q0_hard = np.broadcast_to(a[:, None] / K, (n, K)).copy()
    elif X is not None and Y is not None:
        ax, _, _ = kmeans(X, replace(km_cfg, seed=subseed(km_cfg.seed, "init-x")))
        Q_x, _ = _quiet_factor(HardAssignment(ax.labels, a), K)
        Q0_hard = Q_x
        if K <= m:  # the carried-over Y clustering needs at least K points
            ay, _, _ = kmeans(Y, replace(km_cfg, seed=subseed(km_cfg.seed, "init-y")))
            R_y, _ = _quiet_factor(HardAssignment(ay.labels, b), K)
            cand = (plan_full.matrix / b[None, :]) @ R_y  # P* diag(1/b) R_y
            if gen_kmeans_cost(registered, cand) < gen_kmeans_cost(registered, Q_x):
                Q0_hard = cand
    else:
        assign0, _ = kernel_reduce(registered, K, km_cfg)
        Q0_hard, _ = _quiet_factor(HardAssignment(assign0.labels, a), K)
    timings["init_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    lam = 0.0 if cfg.init == "random" else cfg.blend_lambda
    Q0 = blend_init(Q0_hard, a, lam, cfg.seed)
    Q_soft, history = gkms_solve(registered, Q0, cfg.gkms)
    R = recover_second_factor(plan_full, a, Q_soft)
    plan = LowRankPlan(Q_soft, R, Q_soft.sum(axis=0))
    cost_val = lrot_cost(cost, plan)
    timings["solve_ms"] = 1e3 * (time.perf_counter() - t0)
    return TcResult(
        plan, plan_full, cost_val, _gamma(fullrank, cost_val), history,
        _finish(timings, t_all),
    )


def w2_estimate(plan: LowRankPlan, X, Y) -> float:
    """Low-rank squared-Wasserstein estimate from coupled cluster centroids.

    Pairs the barycenters induced by the two factors and returns
    sum_j g_j ||mu_j(X) - mu_j(Y)||^2.
    """
    X = as_points(X)
    Y = as_points(Y)
    if X.shape[0] != plan.n or Y.shape[0] != plan.m:
        raise ValueError("point counts do not match the plan")
    mu_x = (plan.Q.T @ X) / plan.g[:, None]
    mu_y = (plan.R.T @ Y) / plan.g[:, None]
    return float((plan.g * ((mu_x - mu_y) ** 2).sum(axis=1)).sum())


def _gamma(fullrank: float, lowrank: float) -> float:
    if lowrank <= 1e-14:
        return 1.0  # 0/0 up to roundoff: both optima vanish
    return fullrank / lowrank


def _finish(timings: dict[str, float], t_all: float) -> dict[str, float]:
    timings["total_ms"] = 1e3 * (time.perf_counter() - t_all)
    return timings
