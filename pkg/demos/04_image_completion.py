"""
Image completion with a tensorized image
========================================

A 60x60 colour image is reshaped to a (6, 10, 6, 10, 3) tensor and only 10%
of its pixels are kept. Greedy search is compared with uniform-rank tensor
trains at the same parameter budget.
"""

from greedy_tn import GreedyConfig, LossSpec, RankSweepSpec, greedy_search, rank_sweep
from greedy_tn.io import split_observations, tensorize_image
from greedy_tn.targets import smooth_image

budget = 1000
img = smooth_image(60, 60, 3, 0)
t = tensorize_image(img, (6, 10), (6, 10))
train, test = split_observations(t, 0.1, 0)
spec = LossSpec.masked(train)

cfg = GreedyConfig(edge_search_iters=10, max_params=budget, max_iterations=200)
net, trace = greedy_search(t.shape, spec, cfg, holdout=test)
best = trace.best("test_error")
print(f"greedy: held-out error {best.test_error:.4f} with {best.params} parameters")
print("edges:", best.edges)

for pt in rank_sweep(RankSweepSpec("tt", 1, 50, budget), spec, holdout=test):
    print(f"TT rank {pt.rank}: held-out error {pt.test_error:.4f} with {pt.params} parameters")
