"""
Switching networks and their assumptions
========================================

A network is a finite set of doubly stochastic weight matrices and a random
rule picking one per step.  Asynchrony is just another matrix: the identity
means nobody talked this round.
"""

import numpy as np

from dualbridge import (
    GraphUniverse,
    NetworkProcess,
    certify_a3,
    gossip_matrix,
    lift_matrix,
    metropolis_weights,
    validate_a1,
    validate_a2,
)

# Metropolis weights on a 4-node path
path = np.array([[0, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]])
W = metropolis_weights(path, "path")
print(W.weights)
print("doubly stochastic:", validate_a1(W).ok)

# %%
# Gossip on a star: each activation touches one pair and is disconnected by
# itself, but the union of the four is a spanning tree.
star = [(0, 1), (0, 2), (0, 3), (0, 4)]
proc = NetworkProcess.gossip(5, star, [0.175] * 4, seed=1)
print("labels:", proc.universe.labels)          # the slack 0.3 becomes an idle identity
a2 = validate_a2(proc.universe)
print(f"union connectivity: Re lambda_2 = {a2.lambda2.real:.4f} ok={a2.ok}")
print("single pair alone:", validate_a2([gossip_matrix(5, [(0, 1)])]).ok)
print("A3:", certify_a3(proc).reason)

seq = proc.sample_sequence(20)
print(" ".join(seq))

# %%
# A Markov-switched universe must start in its stationary law to be certified.
u = GraphUniverse((metropolis_weights(path, "path"), metropolis_weights(np.zeros((4, 4), int), "idle")))
good = NetworkProcess.markov(u, [[0.7, 0.3], [0.6, 0.4]])
bad = NetworkProcess.markov(u, [[0.7, 0.3], [0.6, 0.4]], initial=[0.0, 1.0])
print("stationary start:", good.model.initial, certify_a3(good).certified)
print("cold start:", certify_a3(bad).certified, "-", certify_a3(bad).reason)

# %%
# Vector-valued agents mix blockwise through W kron I_n.
print(lift_matrix(gossip_matrix(2, [(0, 1)]), 2))
