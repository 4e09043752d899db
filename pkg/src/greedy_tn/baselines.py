"""Fixed-structure reference models and rank sweeps.

TT, TR and Tucker are all built inside the same network representation
(Tucker as an extra internal node wired to every leaf) and fitted with the
same ALS engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .als import AlsConfig, LossSpec, ObservationSet, optimize
from .network import TensorNetwork, param_count, random_network
from .search import heldout_error

MODELS = ("tt", "tr", "tucker")


@dataclass(frozen=True)
class RankSweepSpec:
    model: str
    rank_start: int = 1
    rank_end: int = 50
    param_cap: int = 25_000

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if not 1 <= self.rank_start <= self.rank_end:
            raise ValueError("need 1 <= rank_start <= rank_end")


def structure_ranks(model: str, dims, rank: int) -> tuple[list[int], np.ndarray]:
    """Dangling dims and rank matrix of a uniform-rank TT, TR or Tucker network."""
    if rank < 1:
        raise ValueError("rank must be >= 1")
    dims = [int(d) for d in dims]
    p = len(dims)
    if model == "tucker":
        ranks = np.ones((p + 1, p + 1), dtype=np.int64)
        ranks[:p, p] = ranks[p, :p] = rank
        return dims + [1], ranks
    ranks = np.ones((p, p), dtype=np.int64)
    for i in range(p - 1):
        ranks[i, i + 1] = ranks[i + 1, i] = rank
    if model == "tr" and p > 2:
        ranks[0, p - 1] = ranks[p - 1, 0] = rank
    elif model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    return dims, ranks


def make_structure(model: str, dims, rank: int, rng_seed=None, scale: float = 0.5) -> TensorNetwork:
    """Random network with the TT (chain), TR (cycle) or Tucker (star) topology."""
    net_dims, ranks = structure_ranks(model, dims, rank)
    return random_network(net_dims, ranks, rng_seed, scale)


def structure_params(model: str, dims, rank: int) -> int:
    net_dims, ranks = structure_ranks(model, dims, rank)
    total = 0
    for k, d in enumerate(net_dims):
        total += d * int(np.prod([ranks[k, j] for j in range(len(net_dims)) if j != k]))
    return total


@dataclass
class SweepPoint:
    rank: int
    params: int
    loss: float
    rel_error: float
    test_error: float | None = None


def rank_sweep(
    spec: RankSweepSpec,
    loss_spec: LossSpec,
    als: AlsConfig = AlsConfig(),
    rng_seed: int = 0,
    holdout: ObservationSet | None = None,
    stop_below: float | None = None,
) -> list[SweepPoint]:
    """Fit each uniform rank in range whose size stays within the cap.

    ``rel_error`` is measured on the fitted entries; ``test_error`` on
    ``holdout`` if given. With ``stop_below``, the sweep ends at the first
    rank whose relative error is below that value.
    """
    dims = loss_spec.dims
    curve = []
    for rank in range(spec.rank_start, spec.rank_end + 1):
        if structure_params(spec.model, dims, rank) > spec.param_cap:
            break
        net = make_structure(spec.model, dims, rank, [rng_seed, rank])
        net, history = optimize(net, loss_spec, als)
        rel = float(np.sqrt(history[-1] / loss_spec.target_energy()))
        test = heldout_error(net, holdout) if holdout is not None else None
        curve.append(SweepPoint(rank, param_count(net), history[-1], rel, test))
        if stop_below is not None and rel < stop_below:
            break
    curve.sort(key=lambda pt: pt.params)
    return curve
