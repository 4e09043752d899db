"""
Recovering a tensor-train structure
===================================

The target is a 7^5 tensor produced by a tensor train with bond ranks
(2, 3, 6, 5). Greedy search starts from rank one, grows one bond per step,
and stops when the relative error drops below 1e-6.
"""

from greedy_tn import GreedyConfig, LossSpec, RankSweepSpec, greedy_search, rank_sweep
from greedy_tn.network import edge_list, param_count
from greedy_tn.targets import target_tensor

t = target_tensor("tt", 1000)
spec = LossSpec.full(t)
cfg = GreedyConfig(loss_threshold=spec.loss_for_relative_error(1e-6), max_params=3000)
net, trace = greedy_search(t.shape, spec, cfg)

for rec in trace.records:
    print(f"{rec.iteration:3d}  edge {str(rec.edge):8s} params {rec.params:5d}  rel err {rec.rel_error:.2e}")
print("status:", trace.status)
print("edges found:", edge_list(net))
print("parameters:", param_count(net), "(generating model has 427)")

# a uniform-rank tensor train needs more parameters for the same accuracy
curve = rank_sweep(RankSweepSpec("tt"), spec, stop_below=1e-6)
print("uniform TT reaching 1e-6:", [(pt.rank, pt.params) for pt in curve if pt.rel_error < 1e-6])
