"""Domain types for measures, couplings, costs, and low-rank factor triples.

Conventions used throughout the package:

* probability vectors are 1-D float64 arrays on the simplex,
* a coupling is an ``n x m`` nonnegative matrix with prescribed marginals,
* a rank-``K`` plan is a factor triple ``(Q, R, g)`` representing
  ``P = Q @ diag(1/g) @ R.T`` with ``Q @ 1 = a``, ``R @ 1 = b`` and
  ``Q.T @ 1 = R.T @ 1 = g``.

All container types are immutable after construction (arrays are marked
read-only) and all operations are pure functions, so everything here is safe
to share across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

# Feasibility tolerances. Marginal residuals up to MARGINAL_TOL are accepted
# (matches what Sinkhorn-type solvers deliver at small epsilon); simplex sums
# are held to the tighter SIMPLEX_TOL.
MARGINAL_TOL = 1e-6
SIMPLEX_TOL = 1e-9

# Dense n*m materialization is forbidden above this many cells; factored
# code paths keep memory at O(n(d+K)).
DENSE_CELL_LIMIT = 2**26


class FeasibilityError(ValueError):
    """A coupling, factor triple, or marginal violates its invariants."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without reaching its target residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepFailureError(RuntimeError):
    """A descent step could not decrease the objective (near-stationarity)."""


class EmptyClusterWarning(UserWarning):
    """A hard assignment produced clusters with zero mass."""


def _freeze(a, dtype=float):
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def uniform(n: int) -> np.ndarray:
    """Uniform probability vector of length n."""
    return np.full(n, 1.0 / n)


def check_prob_vector(w, *, name: str = "weights", tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate and return a probability vector as a float64 array.

    Entries must be nonnegative and sum to 1 within ``tol``.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise FeasibilityError(f"{name} must be 1-D, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise FeasibilityError(f"{name} contains non-finite entries")
    if np.any(w < 0):
        raise FeasibilityError(f"{name} has negative entries (min {w.min():.3e})")
    s = w.sum()
    if abs(s - 1.0) > tol:
        raise FeasibilityError(f"{name} sums to {s!r}, expected 1 within {tol:g}")
    return w


# ---------------------------------------------------------------------------
# cost specifications
# ---------------------------------------------------------------------------


class CostSpec:
    """A transport cost, stored dense or as a low-rank factorization.

    Subclasses implement matrix-free products so the full ``n x m`` matrix is
    only ever formed through :meth:`materialize`, which refuses to allocate
    above ``DENSE_CELL_LIMIT`` cells.
    """

    shape: tuple[int, int]

    @property
    def is_factored(self) -> bool:
        raise NotImplementedError

    def apply(self, M: np.ndarray) -> np.ndarray:
        """C @ M without materializing C."""
        raise NotImplementedError

    def apply_t(self, M: np.ndarray) -> np.ndarray:
        """C.T @ M without materializing C."""
        raise NotImplementedError

    def transpose(self) -> "CostSpec":
        raise NotImplementedError

    def pairs(self, rows, cols) -> np.ndarray:
        """Entries C[rows[t], cols[t]] without materializing C."""
        raise NotImplementedError

    def materialize(self, *, cell_limit: int = DENSE_CELL_LIMIT) -> np.ndarray:
        n, m = self.shape
        if n * m > cell_limit:
            raise MemoryError(
                f"dense {n}x{m} cost exceeds the cell limit {cell_limit}; "
                "use the factored code paths"
            )
        return self._dense()

    def _dense(self) -> np.ndarray:
        raise NotImplementedError

    def median(self) -> float:
        """Median cost entry, used to scale entropic regularization."""
        n, m = self.shape
        if n * m <= DENSE_CELL_LIMIT:
            return float(np.median(self.materialize()))
        # subsample rows deterministically when the matrix is too large
        rows = np.linspace(0, n - 1, num=min(n, 4096), dtype=int)
        e = np.zeros((len(rows), n))
        e[np.arange(len(rows)), rows] = 1.0
        return float(np.median(self.apply_t(e.T)))


@dataclass(frozen=True, eq=False)
class DenseCost(CostSpec):
    """Explicit cost matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"cost matrix must be 2-D, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("cost matrix contains non-finite entries")
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_factored(self):
        return False

    def apply(self, M):
        return self.matrix @ M

    def apply_t(self, M):
        return self.matrix.T @ M

    def transpose(self):
        return DenseCost(self.matrix.T)

    def pairs(self, rows, cols):
        return self.matrix[np.asarray(rows), np.asarray(cols)]

    def _dense(self):
        return np.array(self.matrix)


@dataclass(frozen=True, eq=False)
class SqEuclideanCost(CostSpec):
    """Squared-Euclidean point-cloud cost, C[i, j] = ||x_i - y_j||^2.

    Kept factored as ``x2 1' + 1 y2' - 2 X Y'`` so products cost O(nd) per
    column instead of O(nm).
    """

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: X is {X.shape}, Y is {Y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("point clouds contain non-finite coordinates")
        object.__setattr__(self, "X", _freeze(X))
        object.__setattr__(self, "Y", _freeze(Y))

    @property
    def shape(self):
        return (self.X.shape[0], self.Y.shape[0])

    @property
    def is_factored(self):
        return True

    def apply(self, M):
        x2 = np.einsum("ij,ij->i", self.X, self.X)
        y2 = np.einsum("ij,ij->i", self.Y, self.Y)
        col = M.sum(axis=0)
        return (
            np.outer(x2, col)
            + np.ones((self.X.shape[0], 1)) * (y2 @ M)
            - 2.0 * self.X @ (self.Y.T @ M)
        )

    def apply_t(self, M):
        return self.transpose().apply(M)

    def transpose(self):
        return SqEuclideanCost(self.Y, self.X)

    def pairs(self, rows, cols):
        d = self.X[np.asarray(rows)] - self.Y[np.asarray(cols)]
        return np.einsum("ij,ij->i", d, d)

    def _dense(self):
        d = (
            np.einsum("ij,ij->i", self.X, self.X)[:, None]
            + np.einsum("ij,ij->i", self.Y, self.Y)[None, :]
            - 2.0 * self.X @ self.Y.T
        )
        return np.maximum(d, 0.0)


@dataclass(frozen=True, eq=False)
class FactoredCost(CostSpec):
    """Generic low-rank cost C = A @ B.T."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
            raise ValueError(f"factor shapes do not agree: {A.shape} vs {B.shape}")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "B", _freeze(B))

    @property
    def shape(self):
        return (self.A.shape[0], self.B.shape[0])

    @property
    def is_factored(self):
        return True

    def apply(self, M):
        return self.A @ (self.B.T @ M)

    def apply_t(self, M):
        return self.B @ (self.A.T @ M)

    def transpose(self):
        return FactoredCost(self.B, self.A)

    def pairs(self, rows, cols):
        return np.einsum(
            "ij,ij->i", self.A[np.asarray(rows)], self.B[np.asarray(cols)]
        )

    def _dense(self):
        return self.A @ self.B.T


def as_cost(c) -> CostSpec:
    """Coerce a CostSpec or raw matrix into a CostSpec."""
    if isinstance(c, CostSpec):
        return c
    return DenseCost(np.asarray(c, dtype=float))


# ---------------------------------------------------------------------------
# couplings, permutations, factor triples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Coupling:
    """Nonnegative n x m matrix with prescribed row/column marginals."""

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        a = check_prob_vector(self.row_marginal, name="row_marginal")
        b = check_prob_vector(self.col_marginal, name="col_marginal")
        if P.shape != (a.size, b.size):
            raise FeasibilityError(
                f"coupling shape {P.shape} does not match marginals ({a.size}, {b.size})"
            )
        if np.any(P < 0):
            raise FeasibilityError(f"coupling has negative entries (min {P.min():.3e})")
        r = np.abs(P.sum(axis=1) - a).max()
        c = np.abs(P.sum(axis=0) - b).max()
        if r > MARGINAL_TOL or c > MARGINAL_TOL:
            raise FeasibilityError(
                f"marginal residuals (row {r:.3e}, col {c:.3e}) exceed {MARGINAL_TOL:g}"
            )
        object.__setattr__(self, "matrix", _freeze(P))
        object.__setattr__(self, "row_marginal", _freeze(a))
        object.__setattr__(self, "col_marginal", _freeze(b))

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on {0, ..., n-1}, stored as the image vector sigma."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.int64)
        if s.ndim != 1:
            raise ValueError("sigma must be 1-D")
        n = s.size
        if n == 0 or np.any(s < 0) or np.any(s >= n) or np.unique(s).size != n:
            raise ValueError("sigma is not a bijection on {0, ..., n-1}")
        object.__setattr__(self, "sigma", _freeze(s, dtype=np.int64))

    def __len__(self):
        return self.sigma.size

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.sigma)
        inv[self.sigma] = np.arange(self.sigma.size)
        return Permutation(inv)

    def matrix(self) -> np.ndarray:
        """Dense permutation matrix with P[i, sigma[i]] = 1."""
        n = len(self)
        P = np.zeros((n, n))
        P[np.arange(n), self.sigma] = 1.0
        return P

    def permute_rows(self, M: np.ndarray) -> np.ndarray:
        """Return P_sigma @ M, i.e. out[i] = M[sigma[i]]."""
        return np.asarray(M)[self.sigma]

    def permute_rows_t(self, M: np.ndarray) -> np.ndarray:
        """Return P_sigma.T @ M, i.e. out[sigma[i]] = M[i]."""
        out = np.empty_like(np.asarray(M, dtype=float))
        out[self.sigma] = M
        return out


@dataclass(frozen=True, eq=False)
class LowRankPlan:
    """Factor triple (Q, R, g) with P = Q @ diag(1/g) @ R.T."""

    Q: np.ndarray
    R: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        g = check_prob_vector(self.g, name="g", tol=MARGINAL_TOL)
        if Q.ndim != 2 or R.ndim != 2 or Q.shape[1] != g.size or R.shape[1] != g.size:
            raise FeasibilityError(
                f"factor shapes {Q.shape}, {R.shape} do not match K={g.size}"
            )
        if np.any(Q < 0) or np.any(R < 0):
            raise FeasibilityError("factors have negative entries")
        if np.any(g <= 0):
            raise FeasibilityError("inner marginal g has non-positive entries")
        dq = np.abs(Q.sum(axis=0) - g).max()
        dr = np.abs(R.sum(axis=0) - g).max()
        if dq > MARGINAL_TOL or dr > MARGINAL_TOL:
            raise FeasibilityError(
                f"inner marginals disagree with g (Q {dq:.3e}, R {dr:.3e})"
            )
        object.__setattr__(self, "Q", _freeze(Q))
        object.__setattr__(self, "R", _freeze(R))
        object.__setattr__(self, "g", _freeze(g))

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def m(self):
        return self.R.shape[0]

    @property
    def rank(self):
        return self.g.size

    @property
    def row_marginal(self):
        return self.Q.sum(axis=1)

    @property
    def col_marginal(self):
        return self.R.sum(axis=1)


@dataclass(frozen=True, eq=False)
class HardAssignment:
    """Cluster labels plus per-point mass; encodes a hard transport plan."""

    labels: np.ndarray
    row_mass: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        mass = check_prob_vector(self.row_mass, name="row_mass")
        if lab.ndim != 1 or lab.size != mass.size:
            raise FeasibilityError("labels and row_mass lengths disagree")
        if lab.size and lab.min() < 0:
            raise FeasibilityError("labels must be nonnegative")
        object.__setattr__(self, "labels", _freeze(lab, dtype=np.int64))
        object.__setattr__(self, "row_mass", _freeze(mass))

    @property
    def n(self):
        return self.labels.size

    def cluster_masses(self, K: int | None = None) -> np.ndarray:
        K = int(self.labels.max()) + 1 if K is None else K
        return np.bincount(self.labels, weights=self.row_mass, minlength=K)


@dataclass(frozen=True, eq=False)
class LabeledPointCloud:
    """n points in R^d with optional ground-truth class labels."""

    points: np.ndarray
    labels: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        object.__setattr__(self, "points", _freeze(pts))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.size != pts.shape[0]:
                raise ValueError("label count does not match point count")
            object.__setattr__(self, "labels", _freeze(lab, dtype=np.int64))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def as_points(obj) -> np.ndarray:
    """Extract an (n, d) coordinate array from a point cloud or raw array."""
    if isinstance(obj, LabeledPointCloud):
        return obj.points
    return np.atleast_2d(np.asarray(obj, dtype=float))


# ---------------------------------------------------------------------------
# plan algebra
# ---------------------------------------------------------------------------


def assemble_plan(plan: LowRankPlan, *, cell_limit: int = DENSE_CELL_LIMIT) -> Coupling:
    """Materialize P = Q @ diag(1/g) @ R.T as a dense coupling.

    Only valid below the dense cell limit; cost evaluation at scale should go
    through :func:`lrot_cost` instead.
    """
    n, m = plan.n, plan.m
    if n * m > cell_limit:
        raise MemoryError(f"refusing to assemble a dense {n}x{m} plan")
    P = (plan.Q / plan.g) @ plan.R.T
    return Coupling(P, plan.row_marginal, plan.col_marginal)


def lrot_cost(cost: CostSpec, plan: LowRankPlan) -> float:
    """Transport cost <C, Q diag(1/g) R.T> evaluated through the factors."""
    cost = as_cost(cost)
    if cost.shape != (plan.n, plan.m):
        raise ValueError(f"cost shape {cost.shape} does not match plan ({plan.n}, {plan.m})")
    W = cost.apply(plan.R)  # n x K, column k = C @ r_k
    return float(np.sum(plan.Q * W / plan.g))


def full_cost(cost: CostSpec, coupling: Coupling | np.ndarray) -> float:
    """Frobenius inner product <C, P>."""
    cost = as_cost(cost)
    P = coupling.matrix if isinstance(coupling, Coupling) else np.asarray(coupling, dtype=float)
    if cost.shape != P.shape:
        raise ValueError(f"cost shape {cost.shape} does not match coupling {P.shape}")
    if not cost.is_factored:
        return float(np.sum(cost.matrix * P))
    # <A B', P> = sum(A * (P @ B)) works for any factored representation
    if isinstance(cost, FactoredCost):
        return float(np.sum(cost.A * (P @ cost.B)))
    x2 = np.einsum("ij,ij->i", cost.X, cost.X)
    y2 = np.einsum("ij,ij->i", cost.Y, cost.Y)
    return float(
        P.sum(axis=1) @ x2 + P.sum(axis=0) @ y2 - 2.0 * np.sum(cost.X * (P @ cost.Y))
    )


def hard_to_factor(assign: HardAssignment, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Expand a hard assignment into its factor matrix Q and inner marginal g.

    Q[i, labels[i]] = row_mass[i]; zero-mass clusters are kept in g and
    reported with an EmptyClusterWarning rather than dropped, since silently
    compacting K changes the problem downstream.
    """
    labels = assign.labels
    if labels.size and labels.max() >= K:
        raise ValueError(f"label {labels.max()} out of range for K={K}")
    n = assign.n
    Q = np.zeros((n, K))
    Q[np.arange(n), labels] = assign.row_mass
    g = Q.sum(axis=0)
    empty = np.flatnonzero(g == 0)
    if empty.size:
        warnings.warn(
            f"clusters {empty.tolist()} carry zero mass", EmptyClusterWarning, stacklevel=2
        )
    return Q, g


def plan_from_hard(
    assign_x: HardAssignment, labels_y_or_R, K: int
) -> LowRankPlan:
    """Build a feasible LowRankPlan from a hard X-assignment and an R factor.

    ``labels_y_or_R`` is either a matching HardAssignment for the Y side or an
    explicit m x K nonnegative factor. Zero-mass co-clusters are dropped so
    the triple satisfies g > 0 (the plan's nonnegative rank only shrinks).
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyClusterWarning)
        Q, g = hard_to_factor(assign_x, K)
        if isinstance(labels_y_or_R, HardAssignment):
            R, g_r = hard_to_factor(labels_y_or_R, K)
        else:
            R = np.asarray(labels_y_or_R, dtype=float)
            g_r = R.sum(axis=0)
    if np.abs(g - g_r).max() > MARGINAL_TOL:
        raise FeasibilityError("X and Y factors induce different inner marginals")
    keep = g > 0
    return LowRankPlan(Q[:, keep], R[:, keep], g[keep])
