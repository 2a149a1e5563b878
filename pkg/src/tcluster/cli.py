"""Command-line interface: dataset generation, solving, estimation, bound
verification, and ablation sweeps with machine-readable reports.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure,
4 bound violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import datasets
from .core import (
    ConvergenceError,
    DenseCost,
    FeasibilityError,
    SqEuclideanCost,
    StepFailureError,
)
from .evaluation import ami, ari, cta
from .fullrank import SinkhornConfig, assignment_cost, exact_assignment
from .genkmeans import GkmsConfig
from .oracle import (
    MAX_N_BIPARTITION,
    brute_balanced_bipartition,
    partition_pair_cost,
    verify_approximation_bound,
)
from .pipeline import (
    TcConfig,
    transport_cluster,
    transport_cluster_kantorovich,
    w2_estimate,
)
from .registration import monge_register
from .rng import subseed, substream

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3
EXIT_BOUND = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_points(path, points, labels=None):
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    header = ",".join(f"x{i}" for i in range(d))
    cols = [points]
    if labels is not None:
        header += ",label"
        cols.append(np.asarray(labels, dtype=float)[:, None])
    np.savetxt(path, np.hstack(cols), delimiter=",", header=header, comments="", fmt="%.17g")


def read_points(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if header and header[-1] == "label":
        return data[:, :-1], data[:, -1].astype(np.int64)
    return data, None


def write_cost(path, matrix):
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")


def read_cost(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_labels(path, labels_x, labels_y):
    np.savetxt(
        path,
        np.column_stack([labels_x, labels_y]),
        delimiter=",",
        header="label_x,label_y",
        comments="",
        fmt="%d",
    )


def _workers():
    env = os.environ.get("TC_THREADS", "")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _pool_map(fn, items):
    """Map preserving item order; fans out when more than one worker."""
    w = _workers()
    if w <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "dataset": args.dataset,
        "seed": args.seed,
        "out": str(out),
        "files": [],
    }

    def emit(name, writer, *wargs):
        path = out / name
        writer(path, *wargs)
        manifest["files"].append(name)

    if args.dataset == "moons8g":
        X, Y = datasets.gen_moons_gaussians(args.n, args.sigma2, args.seed)
        manifest.update(n=args.n, sigma2=args.sigma2)
        emit("X.csv", write_points, X.points, X.labels)
        emit("Y.csv", write_points, Y.points, Y.labels)
        emit("labels.csv", write_labels, X.labels, Y.labels)
    elif args.dataset == "shifted-gaussians":
        X, Y, labels = datasets.gen_shifted_gaussians(args.n, args.k, args.sigma2, args.seed)
        manifest.update(n=args.n, k=args.k, sigma2=args.sigma2)
        emit("X.csv", write_points, X.points, labels)
        emit("Y.csv", write_points, Y.points, labels)
        emit("labels.csv", write_labels, labels, labels)
    elif args.dataset == "sbm":
        cost, labels = datasets.gen_sbm_cost(
            args.k, args.cluster_size, args.p, args.q, seed=args.seed
        )
        manifest.update(k=args.k, cluster_size=args.cluster_size, p=args.p, q=args.q)
        emit("cost.csv", write_cost, cost.matrix)
        emit("labels.csv", write_labels, labels, labels)
    elif args.dataset == "hypercube":
        X, Y = datasets.gen_fragmented_hypercube(args.n, args.d, args.seed)
        manifest.update(n=args.n, d=args.d)
        emit("X.csv", write_points, X.points)
        emit("Y.csv", write_points, Y.points)
    elif args.dataset == "lb-euclidean":
        X, Y = datasets.build_euclidean_lb(args.k, args.eps_geom)
        manifest.update(k=args.k, eps_geom=args.eps_geom)
        emit("X.csv", write_points, X.points)
        emit("Y.csv", write_points, Y.points)
    elif args.dataset == "lb-sqeuclidean":
        X, Y = datasets.build_sqeuclidean_lb(args.k, args.eps_geom)
        manifest.update(k=args.k, eps_geom=args.eps_geom)
        emit("X.csv", write_points, X.points)
        emit("Y.csv", write_points, Y.points)
    else:  # pragma: no cover - argparse restricts choices
        raise _UsageError(f"unknown dataset {args.dataset}")
    print(json.dumps(manifest))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _resolve_epsilon(epsilon, scale, cost):
    if scale == "median":
        return epsilon * cost.median()
    return epsilon


def cmd_solve(args) -> int:
    labels_x = labels_y = None
    X = Y = None
    if args.x:
        X, labels_x = read_points(args.x)
    if args.y:
        Y, labels_y = read_points(args.y)
    if args.cost:
        cost = DenseCost(read_cost(args.cost))
    elif X is not None and Y is not None:
        cost = SqEuclideanCost(X, Y)
    else:
        raise _UsageError("need --cost or both --x and --y")

    eps = _resolve_epsilon(args.epsilon, args.epsilon_scale, cost)
    cfg = TcConfig(
        rank=args.rank,
        sinkhorn=SinkhornConfig(
            epsilon=eps, max_iters=args.sinkhorn_iters, tolerance=args.sinkhorn_tol
        ),
        gkms=GkmsConfig(
            step_size=args.gkms_step,
            max_iters=args.gkms_iters,
            monotone_guard=not args.no_guard,
            stop_tol=0.0 if args.fixed_iters else 1e-10,
        ),
        blend_lambda=args.blend,
        registration=args.registration,
        solver=args.solver,
        init=args.init,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    if args.registration == "kantorovich":
        result = transport_cluster_kantorovich(X, Y, None, None, cost, cfg)
    else:
        result = transport_cluster(X, Y, cost, cfg)
    runtime_ms = 1e3 * (time.perf_counter() - t0)

    plan = result.plan
    pred_x = plan.Q.argmax(axis=1)
    pred_y = plan.R.argmax(axis=1)
    report = {
        "cost": result.cost,
        "gamma_achieved": result.gamma,
        "iterations": max(0, len(result.cost_history) - 1),
        "cost_history": list(result.cost_history),
        "ari_x": ari(pred_x, labels_x) if labels_x is not None else None,
        "ari_y": ari(pred_y, labels_y) if labels_y is not None else None,
        "ami_x": ami(pred_x, labels_x) if labels_x is not None else None,
        "ami_y": ami(pred_y, labels_y) if labels_y is not None else None,
        "cta": (
            cta(plan, labels_x, labels_y)
            if labels_x is not None and labels_y is not None
            else None
        ),
        "psd_defect": result.psd_defect,
        "runtime_ms": dict(result.timings, cli_total_ms=runtime_ms),
        "config": {
            "rank": cfg.rank,
            "epsilon": eps,
            "epsilon_scale": args.epsilon_scale,
            "gkms_step": args.gkms_step,
            "gkms_iters": args.gkms_iters,
            "blend_lambda": args.blend,
            "registration": args.registration,
            "solver": args.solver,
            "init": args.init,
            "seed": args.seed,
        },
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2))
    base = out.parent
    write_cost(base / "Q.csv", plan.Q)
    write_cost(base / "R.csv", plan.R)
    write_cost(base / "g.csv", plan.g[None, :])
    print(json.dumps({"report": str(out), "cost": result.cost, "gamma_achieved": result.gamma}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate-w2
# ---------------------------------------------------------------------------


def _w2_single(task):
    n, d, rank, seed = task
    X, Y = datasets.gen_fragmented_hypercube(n, d, seed)
    cfg = TcConfig(rank=rank, seed=subseed(seed, "tc"))
    result = transport_cluster(X, Y, None, cfg)
    est_tc = w2_estimate(result.plan, X, Y)
    cost = SqEuclideanCost(X.points, Y.points)
    est_plugin = assignment_cost(cost, exact_assignment(cost))
    return est_tc, est_plugin


def cmd_estimate_w2(args) -> int:
    grid = [int(v) for v in args.n_grid.split(",") if v]
    if not grid:
        raise _UsageError("empty --n-grid")
    truth = datasets.HYPERCUBE_W2_SQ
    rows = []
    for n in grid:
        tasks = [
            (n, args.d, args.rank, subseed(args.seed, f"w2-{n}-{run}"))
            for run in range(args.runs)
        ]
        outcomes = _pool_map(_w2_single, tasks)
        tc_err = float(np.mean([abs(tc - truth) for tc, _ in outcomes]))
        plug_err = float(np.mean([abs(p - truth) for _, p in outcomes]))
        rows.append((n, "tc", tc_err))
        rows.append((n, "full_rank", plug_err))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("n,method,mean_abs_error,ground_truth\n")
        for n, method, err in rows:
            fh.write(f"{n},{method},{err:.10g},{truth:.10g}\n")
    print(json.dumps({"out": str(out), "runs": args.runs, "d": args.d, "rank": args.rank}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-bounds
# ---------------------------------------------------------------------------

_COST_CLASSES = {
    "l2": "negative_type",
    "sql2": "kernel",
    "metric": "metric",
}


def _trial_cost(rng, n, cost_class):
    X = rng.uniform(0.0, 1.0, size=(n, 2))
    Y = rng.uniform(0.0, 1.0, size=(n, 2))
    diff = X[:, None, :] - Y[None, :, :]
    if cost_class == "l2":
        return DenseCost(np.sqrt((diff**2).sum(-1)))
    if cost_class == "sql2":
        return DenseCost((diff**2).sum(-1))
    return DenseCost(np.abs(diff).max(-1))  # Chebyshev: a metric


def _lb_report(kind, k, eps):
    if kind == "euclidean":
        X, Y = datasets.build_euclidean_lb(k, eps)
        ref = datasets.euclidean_lb_reference(k, eps)
        diff = X.points[:, None, :] - Y.points[None, :, :]
        C = np.sqrt((diff**2).sum(-1))
        ratio_floor = 2.0 - 6.0 / k - 10.0 * eps
    else:
        X, Y = datasets.build_sqeuclidean_lb(k, eps)
        ref = datasets.sqeuclidean_lb_reference(k, eps)
        diff = X.points[:, None, :] - Y.points[None, :, :]
        C = (diff**2).sum(-1)
        ratio_floor = 3.0 - 15.0 / k - 10.0 * eps
    n = C.shape[0]
    cost = DenseCost(C)
    sigma = exact_assignment(cost)
    monge_cost = float(C[np.arange(n), sigma.sigma].sum())
    px = ref["nonmonge_parts_x"]
    py = ref["nonmonge_parts_y"]
    labels_x = np.empty(n, dtype=np.int64)
    labels_y = np.empty(n, dtype=np.int64)
    for c, (ix, iy) in enumerate(zip(px, py)):
        labels_x[list(ix)] = c
        labels_y[list(iy)] = c
    nonmonge_cost = partition_pair_cost(C, labels_x, labels_y)
    bound = ref["sigma_respecting_bound"]
    if n <= 2 * MAX_N_BIPARTITION:
        registered = monge_register(cost, sigma)
        oracle_opt, _ = brute_balanced_bipartition(registered)
        sigma_respecting = float(oracle_opt)
    else:
        sigma_respecting = float(bound)
    achieved_ratio = sigma_respecting / monge_cost
    report = {
        "kind": kind,
        "k": k,
        "eps": eps,
        "n": n,
        "monge_cost": monge_cost,
        "monge_cost_expected": ref["monge_cost"],
        "sigma_respecting_bound": bound,
        "sigma_respecting": sigma_respecting,
        "nonmonge_cost": float(nonmonge_cost),
        "achieved_ratio": achieved_ratio,
        "ratio_floor": ratio_floor,
    }
    violations = []
    if abs(monge_cost - ref["monge_cost"]) > 1e-9:
        violations.append("monge_cost")
    if sigma_respecting < bound - 1e-6:
        violations.append("sigma_respecting_bound")
    if achieved_ratio < ratio_floor:
        violations.append("achieved_ratio")
    report["violations"] = violations
    return report


def cmd_verify_bounds(args) -> int:
    report = {"trials": args.trials, "n": args.n, "rank": args.rank}
    violations = 0
    if args.trials > 0:
        bound_class = _COST_CLASSES[args.cost_class]
        worst = 0.0
        failed = 0
        for t in range(args.trials):
            rng = substream(args.seed, f"trial-{t}")
            cost = _trial_cost(rng, args.n, args.cost_class)
            rep = verify_approximation_bound(cost, args.rank, bound_class)
            if not rep.passed:
                failed += 1
            if rep.lowrank_opt > 0:
                worst = max(worst, rep.registered_opt / rep.lowrank_opt)
        report.update(
            cost_class=args.cost_class,
            bound_class=bound_class,
            violations=failed,
            worst_observed_ratio=worst,
        )
        violations += failed
    if args.lb:
        lb = _lb_report(args.lb, args.lb_k, args.lb_eps)
        report["lower_bound"] = lb
        violations += len(lb["violations"])
    report["total_violations"] = violations
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_BOUND if violations else EXIT_OK


# ---------------------------------------------------------------------------
# ablate
# ---------------------------------------------------------------------------


def _ablate_epsilon_one(task):
    n, sigma2, seed, rank, eps_rel, scale = task
    X, Y = datasets.gen_moons_gaussians(n, sigma2, seed)
    cost = SqEuclideanCost(X.points, Y.points)
    eps = _resolve_epsilon(eps_rel, scale, cost)
    cfg = TcConfig(
        rank=rank, seed=seed, registration="kantorovich",
        sinkhorn=SinkhornConfig(epsilon=eps, tolerance=1e-3, max_iters=2000),
    )
    return transport_cluster_kantorovich(X.points, Y.points, None, None, cost, cfg).cost


def _ablate_init_one(task):
    n, rank, sigma2, seed, mode = task
    X, Y, _ = datasets.gen_shifted_gaussians(n, rank, sigma2, seed)
    return transport_cluster(X, Y, None, TcConfig(rank=rank, seed=seed, init=mode)).cost


def _ablate_rank_one(task):
    n, k, sigma2, seed, rank = task
    X, Y, _ = datasets.gen_shifted_gaussians(n, k, sigma2, seed)
    return transport_cluster(X, Y, None, TcConfig(rank=rank, seed=seed)).cost


def cmd_ablate(args) -> int:
    if args.sweep == "epsilon":
        grid = [10.0**e for e in range(-5, 2)]
        tasks = [
            (args.n, args.sigma2, args.seed, args.rank, eps_rel, args.epsilon_scale)
            for eps_rel in grid
        ]
        costs = _pool_map(_ablate_epsilon_one, tasks)
        rows = [("epsilon", f"{e:g}", c) for e, c in zip(grid, costs)]
    elif args.sweep == "init":
        modes = ["registered", "random"]
        tasks = [(args.n, args.rank, args.sigma2, args.seed, m) for m in modes]
        costs = _pool_map(_ablate_init_one, tasks)
        rows = [("init", m, c) for m, c in zip(modes, costs)]
    else:
        ranks = [int(v) for v in args.ranks.split(",") if v]
        tasks = [(args.n, args.k, args.sigma2, args.seed, r) for r in ranks]
        costs = _pool_map(_ablate_rank_one, tasks)
        rows = [("rank", str(r), c) for r, c in zip(ranks, costs)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("sweep,param,cost\n")
        for sweep, param, cost_val in rows:
            fh.write(f"{sweep},{param},{cost_val:.10g}\n")
    print(json.dumps({"out": str(out), "rows": len(rows)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="tcluster", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset to CSV")
    g.add_argument("--dataset", required=True, choices=[
        "moons8g", "shifted-gaussians", "sbm", "hypercube",
        "lb-euclidean", "lb-sqeuclidean",
    ])
    g.add_argument("--n", type=int, default=1024)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--k", type=int, default=8)
    g.add_argument("--cluster-size", type=int, default=50)
    g.add_argument("--sigma2", type=float, default=0.1)
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--q", type=float, default=0.25)
    g.add_argument("--eps-geom", type=float, default=1e-3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    s = sub.add_parser("solve", help="run transport clustering on files")
    s.add_argument("--x")
    s.add_argument("--y")
    s.add_argument("--cost")
    s.add_argument("--rank", type=int, required=True)
    s.add_argument("--epsilon", type=float, default=1e-5)
    s.add_argument("--epsilon-scale", choices=["absolute", "median"], default="absolute")
    s.add_argument("--sinkhorn-iters", type=int, default=10_000)
    s.add_argument("--sinkhorn-tol", type=float, default=1e-6)
    s.add_argument("--gkms-step", type=float, default=2.0)
    s.add_argument("--gkms-iters", type=int, default=250)
    s.add_argument("--fixed-iters", action="store_true",
                   help="disable the early-stopping rule")
    s.add_argument("--no-guard", action="store_true",
                   help="disable the monotone descent guard")
    s.add_argument("--blend", type=float, default=0.5)
    s.add_argument("--registration", choices=["monge", "kantorovich"], default="monge")
    s.add_argument("--solver", choices=["gkms", "kernel", "auto"], default="gkms")
    s.add_argument("--init", choices=["registered", "random"], default="registered")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_solve)

    e = sub.add_parser("estimate-w2", help="low-rank Wasserstein estimation benchmark")
    e.add_argument("--d", type=int, default=30)
    e.add_argument("--rank", type=int, default=10)
    e.add_argument("--n-grid", default="29,36,44,54,66,80,98,119")
    e.add_argument("--runs", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_estimate_w2)

    v = sub.add_parser("verify-bounds", help="randomized approximation-bound checks")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--n", type=int, default=6)
    v.add_argument("--rank", type=int, default=2)
    v.add_argument("--cost-class", choices=["l2", "sql2", "metric"], default="sql2")
    v.add_argument("--lb", choices=["euclidean", "sqeuclidean"])
    v.add_argument("--lb-k", type=int, default=200)
    v.add_argument("--lb-eps", type=float, default=1e-3)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(fn=cmd_verify_bounds)

    a = sub.add_parser("ablate", help="sensitivity sweeps, CSV output")
    a.add_argument("--sweep", required=True, choices=["epsilon", "init", "rank"])
    a.add_argument("--n", type=int, default=1024)
    a.add_argument("--k", type=int, default=16)
    a.add_argument("--rank", type=int, default=10)
    a.add_argument("--ranks", default="2,4,8,16")
    a.add_argument("--sigma2", type=float, default=0.25)
    a.add_argument("--epsilon-scale", choices=["absolute", "median"], default="median")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    a.set_defaults(fn=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, FeasibilityError, datasets.DisconnectedGraphError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, StepFailureError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
