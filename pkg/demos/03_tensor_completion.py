"""
Tensor completion from a sparse sample
======================================

Only 30% of the entries of an 8^4 tensor train are observed. The search fits
the observed entries and the remaining 70% measure how well it generalizes.
"""

from greedy_tn import GreedyConfig, LossSpec, greedy_search
from greedy_tn.io import split_observations
from greedy_tn.targets import tt_tensor

t = tt_tensor([8] * 4, [2, 2, 2], 4000)
train, test = split_observations(t, 0.3, 0)
print("observed entries:", len(train), "held out:", len(test))

spec = LossSpec.masked(train)
cfg = GreedyConfig(loss_threshold=spec.loss_for_relative_error(1e-6), edge_search_iters=10, max_params=2000)
net, trace = greedy_search(t.shape, spec, cfg, holdout=test)

for rec in trace.records:
    print(f"{rec.iteration:3d}  params {rec.params:5d}  train {rec.rel_error:.2e}  held out {rec.test_error:.2e}")
