"""Low-rank optimal transport via transport registration and clustering."""

from .core import (
    Coupling,
    CostSpec,
    DenseCost,
    FactoredCost,
    FeasibilityError,
    ConvergenceError,
    StepFailureError,
    HardAssignment,
    LabeledPointCloud,
    LowRankPlan,
    Permutation,
    SqEuclideanCost,
    as_cost,
    assemble_plan,
    full_cost,
    hard_to_factor,
    lrot_cost,
    plan_from_hard,
    uniform,
)
from .fullrank import (
    SinkhornConfig,
    SinkhornResult,
    assignment_cost,
    exact_assignment,
    extract_permutation,
    sinkhorn,
)
from .registration import kantorovich_register, monge_register, recover_second_factor
from .clustering import KMeansConfig, kmeans, kmeans_distortion, kmedians
from .genkmeans import (
    GkmsConfig,
    GkmsState,
    gen_kmeans_cost,
    gkms_gradient,
    gkms_solve,
    gkms_step,
    hard_polish,
    kernel_reduce,
    round_to_hard,
)
from .pipeline import (
    TcConfig,
    TcResult,
    blend_init,
    registered_init,
    transport_cluster,
    transport_cluster_kantorovich,
    w2_estimate,
)
from .evaluation import ami, ari, cta, relative_cost

__version__ = "0.1.0"

__all__ = [
    "Coupling",
    "CostSpec",
    "DenseCost",
    "FactoredCost",
    "SqEuclideanCost",
    "FeasibilityError",
    "ConvergenceError",
    "StepFailureError",
    "HardAssignment",
    "LabeledPointCloud",
    "LowRankPlan",
    "Permutation",
    "as_cost",
    "assemble_plan",
    "full_cost",
    "hard_to_factor",
    "lrot_cost",
    "plan_from_hard",
    "uniform",
    "SinkhornConfig",
    "SinkhornResult",
    "assignment_cost",
    "exact_assignment",
    "extract_permutation",
    "sinkhorn",
    "kantorovich_register",
    "monge_register",
    "recover_second_factor",
    "KMeansConfig",
    "kmeans",
    "kmeans_distortion",
    "kmedians",
    "GkmsConfig",
    "GkmsState",
    "gen_kmeans_cost",
    "gkms_gradient",
    "gkms_solve",
    "gkms_step",
    "hard_polish",
    "kernel_reduce",
    "round_to_hard",
    "TcConfig",
    "TcResult",
    "blend_init",
    "registered_init",
    "transport_cluster",
    "transport_cluster_kantorovich",
    "w2_estimate",
    "ami",
    "ari",
    "cta",
    "relative_cost",
]
