"""
Tensor networks and edge growth
===============================

A network over p cores stores one core per node. Core k has order p: mode k
is the dangling leg, mode j is the bond to node j, and a bond of rank 1 means
there is no edge.
"""

import numpy as np

from greedy_tn import (
    SliceInitPolicy,
    evaluate,
    increment_edge,
    init_rank_one,
    param_count,
    random_network,
)

rng = np.random.default_rng(0)

# a 3-node chain with bond ranks 2 and 3
ranks = np.array([[1, 2, 1], [2, 1, 3], [1, 3, 1]])
net = random_network([4, 5, 6], ranks, rng)
print("core shapes:", [c.shape for c in net.cores])
print("parameters:", param_count(net))
print("full tensor:", evaluate(net).shape)

# grow the (0, 2) bond from 1 to 2, filling the new slices with zeros
grown = increment_edge(net, 0, 2, SliceInitPolicy.zeros())
print("after growth:", param_count(grown), "parameters")
print("tensor unchanged:", np.max(np.abs(evaluate(grown) - evaluate(net))))

# the search starts from the rank-one network
start = init_rank_one([7] * 5, 0)
print("rank-one start on 7^5:", param_count(start), "parameters")
