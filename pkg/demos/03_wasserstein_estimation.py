"""Squared-Wasserstein estimation on the fragmented hypercube.

The benchmark pushes a uniform cube through a sign-shift map with known
squared distance 8. The plug-in matching estimate suffers the curse of
dimension; the low-rank centroid estimator converges much faster.
"""

import numpy as np

import tcluster as tc
from tcluster.datasets import HYPERCUBE_W2_SQ, gen_fragmented_hypercube

d, K, runs = 30, 10, 5
print(f"dimension {d}, rank {K}, {runs} runs per sample size, truth = {HYPERCUBE_W2_SQ}\n")
print(f"{'n':>5} {'low-rank err':>14} {'plug-in err':>13}")
for n in [29, 54, 80, 119]:
    lr, plug = [], []
    for run in range(runs):
        X, Y = gen_fragmented_hypercube(n, d, seed=1000 * run + n)
        res = tc.transport_cluster(X, Y, None, tc.TcConfig(rank=K, seed=run))
        lr.append(abs(tc.w2_estimate(res.plan, X, Y) - HYPERCUBE_W2_SQ))
        cost = tc.SqEuclideanCost(X.points, Y.points)
        full = tc.assignment_cost(cost, tc.exact_assignment(cost))
        plug.append(abs(full - HYPERCUBE_W2_SQ))
    print(f"{n:>5} {np.mean(lr):>14.3f} {np.mean(plug):>13.3f}")

print("\nThe low-rank estimate averages matched cluster centroids, so the")
print("pairing noise that dominates the plug-in estimate largely cancels.")
