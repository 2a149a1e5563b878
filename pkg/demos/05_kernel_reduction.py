"""Exact reduction to K-means for costs with negative-definite symmetrization.

Double-centering the symmetrized registered cost yields a Gram matrix; when
it is positive semidefinite the clustering problem IS K-means on the
embedded points, and the spectral defect certifies how exact that is.
"""

import numpy as np

import tcluster as tc
from tcluster.genkmeans import kernel_reduce

rng = np.random.default_rng(12)

# self-cost of a point cloud: classically reducible, defect ~ 0
Z = rng.normal(size=(40, 2))
assign, defect = kernel_reduce(tc.SqEuclideanCost(Z, Z), 4)
km_assign, _, km_distortion = tc.kmeans(Z, tc.KMeansConfig(K=4, seed=0))
print(f"self-cost: psd defect {defect:.2e}; distortions "
      f"{tc.kmeans_distortion(Z, assign):.4f} (reduction) vs {km_distortion:.4f} (direct)")

# an affine pushforward with a positive linear part stays reducible
d = 3
M = rng.normal(size=(d, d))
A = M @ M.T + 0.5 * np.eye(d)
X = rng.normal(size=(40, d))
Y = X @ A.T + 1.0
_, defect = kernel_reduce(tc.SqEuclideanCost(X, Y), 4)
print(f"affine pushforward (PSD part): psd defect {defect:.2e}")

# a generic asymmetric cost is not reducible; the defect reports it and the
# pipeline in auto mode falls back to mirror descent
C = rng.normal(size=(40, 40))
_, defect = kernel_reduce(tc.as_cost(C), 4)
print(f"random asymmetric cost: psd defect {defect:.3f} (falls back to mirror descent)")

res = tc.transport_cluster(Z, Z, None, tc.TcConfig(rank=4, seed=0, solver="auto"))
print(f"pipeline solver=auto on the self instance: defect {res.psd_defect:.2e}, "
      f"cost {res.cost:.5f}")
