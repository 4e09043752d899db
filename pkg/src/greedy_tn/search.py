"""Greedy structure search for tensor networks.

Starting from a random rank-one network, each iteration scores every
feasible rank increment by briefly optimizing only the new slices, grows the
best edge with weight transfer, re-optimizes all cores with ALS and finally
tries to split cores into two via truncated SVD.
"""

from __future__ import annotations

import itertools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .als import AlsConfig, LossSpec, ObservationSet, loss, optimize, optimize_new_slices
from .network import (
    TensorNetwork,
    edge_list,
    evaluate,
    evaluate_at,
    init_rank_one,
    param_count,
    random_network,
)
from .tensor_ops import frobenius, matricize
from .transfer import SliceInitPolicy, increment_edge

logger = logging.getLogger(__name__)


class BudgetExhausted(RuntimeError):
    """No candidate edge can be incremented within the parameter budget."""


@dataclass(frozen=True)
class GreedyConfig:
    max_params: int = 10**9
    loss_threshold: float | None = None
    max_iterations: int = 100
    edge_search_iters: int = 2
    split_threshold: float = 1e-5
    slice_policy: SliceInitPolicy = SliceInitPolicy()
    edge_whitelist: tuple[tuple[int, int], ...] | None = None
    enable_split: bool = True
    transfer_weights: bool = True
    random_walk: bool = False
    # "per-param": loss decrease per added parameter; "loss": lowest loss
    edge_score: str = "per-param"
    rng_seed: int = 0
    init_scale: float = 0.5
    # candidate scores closer than tie_tol * (loss of the zero tensor) are ties
    tie_tol: float = 1e-20
    als: AlsConfig = AlsConfig()

    def __post_init__(self):
        if self.edge_search_iters < 1:
            raise ValueError("edge_search_iters must be >= 1")
        if self.split_threshold < 0:
            raise ValueError("split_threshold must be >= 0")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.edge_score not in ("per-param", "loss"):
            raise ValueError(f"unknown edge score {self.edge_score!r}")
        if self.edge_whitelist is not None:
            wl = tuple(sorted((min(i, j), max(i, j)) for i, j in self.edge_whitelist))
            object.__setattr__(self, "edge_whitelist", wl)


@dataclass
class SplitEvent:
    node: int
    new_node: int
    kept_modes: tuple[int, ...]
    moved_modes: tuple[int, ...]
    rank: int
    saving: int
    discarded: float


@dataclass
class IterationRecord:
    iteration: int
    edge: tuple[int, int] | None
    loss: float
    rel_error: float
    params: int
    wall_time: float
    edges: list[tuple[int, int, int]]
    dims: tuple[int, ...]
    scores: dict[tuple[int, int], float] = field(default_factory=dict)
    splits: list[SplitEvent] = field(default_factory=list)
    test_error: float | None = None


@dataclass
class SearchTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: str = "running"

    def best(self, key: str = "rel_error") -> IterationRecord:
        return min(
            (r for r in self.records if getattr(r, key) is not None),
            key=lambda r: getattr(r, key),
        )


def relative_error(net: TensorNetwork, target: np.ndarray) -> float:
    """``||evaluate(net) - target||_F / ||target||_F``."""
    target = np.asarray(target, dtype=np.float64)
    norm = frobenius(target)
    if norm == 0:
        raise ValueError("relative error is undefined for a zero target")
    w = evaluate(net).reshape(target.shape)
    return frobenius(w - target) / norm


def heldout_error(net: TensorNetwork, obs: ObservationSet) -> float:
    """Relative error of ``net`` on held-out observed entries."""
    from .als import _net_indices

    pred = evaluate_at(net, _net_indices(net, obs))
    return float(np.linalg.norm(pred - obs.values) / np.linalg.norm(obs.values))


def increment_cost(net: TensorNetwork, i: int, j: int) -> int:
    """Number of parameters added by raising ``R_ij`` by one."""
    r = net.ranks
    others = [k for k in range(net.p) if k not in (i, j)]
    cost_i = net.dims[i] * int(np.prod([r[i, k] for k in others], dtype=np.int64))
    cost_j = net.dims[j] * int(np.prod([r[j, k] for k in others], dtype=np.int64))
    return cost_i + cost_j


def feasible_edges(net: TensorNetwork, config: GreedyConfig) -> list[tuple[int, int]]:
    budget = config.max_params - param_count(net)
    if config.edge_whitelist is not None:
        pairs = [(i, j) for i, j in config.edge_whitelist if j < net.p]
    else:
        pairs = list(itertools.combinations(range(net.p), 2))
    return [(i, j) for i, j in pairs if increment_cost(net, i, j) <= budget]


def candidate_seed(rng_seed: int, iteration: int, i: int, j: int) -> list[int]:
    return [rng_seed, iteration, i, j]


def _threads() -> int:
    n = int(os.environ.get("TN_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _explore(net, spec, config, iteration, edge):
    i, j = edge
    grown = increment_edge(
        net, i, j, config.slice_policy, candidate_seed(config.rng_seed, iteration, i, j)
    )
    return optimize_new_slices(grown, edge, spec, config.edge_search_iters, config.als.ridge)


def _explore_all(net, spec, config, iteration):
    edges = feasible_edges(net, config)
    if not edges:
        raise BudgetExhausted(f"no edge fits in {config.max_params} parameters")
    workers = min(_threads(), len(edges))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda e: _explore(net, spec, config, iteration, e), edges))
    else:
        results = [_explore(net, spec, config, iteration, e) for e in edges]
    return dict(zip(edges, results))


def _select(net, spec, config, scores):
    edges = list(scores)
    tol = config.tie_tol * spec.target_energy()
    if config.edge_score == "loss":
        gain = {e: -v for e, v in scores.items()}
    else:
        current = loss(net, spec)
        gain = {e: (current - v) / increment_cost(net, *e) for e, v in scores.items()}
        tol /= min(increment_cost(net, *e) for e in edges)
    top = max(gain.values())
    return next(e for e in edges if gain[e] >= top - tol)


def find_best_edge(
    net: TensorNetwork, spec: LossSpec, config: GreedyConfig, iteration: int = 0
) -> tuple[tuple[int, int], dict[tuple[int, int], float]]:
    """Score every feasible increment by optimizing only its new slices.

    Returns the selected edge and the exploratory loss of every candidate.
    With ``edge_score="loss"`` the edge with the lowest loss wins; with
    ``"per-param"`` the edge with the largest loss decrease per added
    parameter wins. Ties go to the lexicographically smallest edge.
    Candidates are explored on ``TN_THREADS`` worker threads.
    """
    explored = _explore_all(net, spec, config, iteration)
    scores = {e: v for e, (_, v) in explored.items()}
    return _select(net, spec, config, scores), scores


def random_edge(net: TensorNetwork, config: GreedyConfig, rng_seed=None) -> tuple[int, int]:
    """Edge drawn uniformly among the feasible increments."""
    edges = feasible_edges(net, config)
    if not edges:
        raise BudgetExhausted(f"no edge fits in {config.max_params} parameters")
    return edges[int(np.random.default_rng(rng_seed).integers(len(edges)))]


def _bipartitions(modes: list[int], anchor: int, exhaustive: bool):
    """Yield ``(kept, moved)`` splits of ``modes`` with ``anchor`` in ``kept``."""
    rest = [m for m in modes if m != anchor]
    if exhaustive:
        for size in range(1, len(rest) + 1):
            for moved in itertools.combinations(rest, size):
                yield tuple(m for m in modes if m not in moved), moved
    else:
        for m in rest:
            yield tuple(x for x in modes if x != m), (m,)
        if len(rest) > 1:
            yield (anchor,), tuple(rest)


def _best_split(core: np.ndarray, k: int, epsilon: float, relative: bool, max_exhaustive: int):
    big = [m for m, s in enumerate(core.shape) if s > 1]
    if len(big) < 2:
        return None
    anchor = k if core.shape[k] > 1 else big[0]
    best = None
    for kept, moved in _bipartitions(big, anchor, len(big) <= max_exhaustive):
        # size-1 modes are placed with the kept side
        rows = [m for m in range(core.ndim) if m not in moved]
        mat = matricize(core, rows)
        s = np.linalg.svd(mat, compute_uv=False)
        cut = epsilon * s[0] if relative else epsilon
        r = max(1, int(np.sum(s >= cut)))
        saving = core.size - r * (mat.shape[0] + mat.shape[1])
        if saving > 0 and (best is None or saving > best[0]):
            best = (saving, tuple(rows), moved, r)
    return best


def _apply_split(net: TensorNetwork, k: int, rows, moved, r):
    core = net.cores[k]
    p = net.p
    mat = matricize(core, rows)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    discarded = float(np.sqrt(np.sum(s[r:] ** 2)))

    cores = []
    for m, c in enumerate(net.cores):
        c = c[..., np.newaxis]
        if m in moved and m != k:
            # the bond to k now leads to the new node
            c = np.swapaxes(c, k, p)
        cores.append(c)

    kept_shape = [core.shape[m] if m in rows else 1 for m in range(p)] + [r]
    cores[k] = u[:, :r].reshape(kept_shape)

    b_modes = sorted(set(moved) | {k})
    b_mat = (s[:r, None] * vt[:r]).reshape([r] + [core.shape[m] for m in moved])
    b = np.moveaxis(b_mat, 0, b_modes.index(k))
    new_shape = [1] * (p + 1)
    for m in moved:
        new_shape[m] = core.shape[m]
    new_shape[k] = r
    cores.append(b.reshape(new_shape))
    return net.with_cores(cores), discarded


def split_nodes(
    net: TensorNetwork,
    epsilon: float = 1e-5,
    relative: bool = True,
    max_exhaustive: int = 6,
) -> tuple[TensorNetwork, list[SplitEvent]]:
    """Split cores whose matricizations are numerically low rank.

    For every core and every bipartition of its non-trivial modes, the rank
    ``r`` kept is the number of singular values ``>= epsilon`` (times the
    largest one when ``relative``). A split is accepted only if it lowers the
    parameter count and moves the represented tensor by at most
    ``epsilon * ||W||_F``; each core is split at most once, larger savings
    first. The new node is appended with a dangling leg of size 1.
    """
    events: list[SplitEvent] = []
    todo = set(range(net.p))
    reference = evaluate(net).ravel()
    budget = epsilon * np.linalg.norm(reference)
    while todo:
        options = []
        for k in sorted(todo):
            found = _best_split(net.cores[k], k, epsilon, relative, max_exhaustive)
            if found is not None:
                options.append((-found[0], k, found))
            else:
                todo.discard(k)
        if not options:
            break
        _, k, (saving, rows, moved, r) = min(options)
        todo.discard(k)
        candidate, discarded = _apply_split(net, k, rows, moved, r)
        change = np.linalg.norm(evaluate(candidate).ravel() - reference)
        if change > budget:
            logger.debug("rejected split of node %d: tensor moved by %.3e", k, change)
            continue
        new_node = net.p
        net = candidate
        kept = tuple(m for m in rows if net.cores[k].shape[m] > 1)
        events.append(SplitEvent(k, new_node, kept, tuple(moved), r, saving, discarded))
        logger.debug("split node %d into %d with rank %d (saves %d)", k, new_node, r, saving)
    return net, events


def _record(iteration, edge, net, current, spec, started, holdout, scores=None, splits=None):
    energy = spec.target_energy()
    return IterationRecord(
        iteration=iteration,
        edge=edge,
        loss=current,
        rel_error=float(np.sqrt(current / energy)) if energy > 0 else float("nan"),
        params=param_count(net),
        wall_time=time.perf_counter() - started,
        edges=edge_list(net),
        dims=net.dims,
        scores=dict(scores or {}),
        splits=list(splits or []),
        test_error=heldout_error(net, holdout) if holdout is not None else None,
    )


def greedy_search(
    dims,
    spec: LossSpec,
    config: GreedyConfig = GreedyConfig(),
    holdout: ObservationSet | None = None,
    callback=None,
) -> tuple[TensorNetwork, SearchTrace]:
    """Learn structure and cores of a tensor network minimizing ``spec``.

    Stops when the loss reaches ``config.loss_threshold``, when no edge fits
    in ``config.max_params`` or after ``config.max_iterations`` increments.
    ``holdout`` entries, if given, are only used to report a test error.
    ``callback(net, record)`` is called after every iteration.
    """
    dims = tuple(int(d) for d in dims)
    if config.max_params < sum(dims):
        raise ValueError(f"max_params {config.max_params} is below the rank-one size {sum(dims)}")
    threshold = config.loss_threshold
    als = config.als
    if threshold is not None:
        als = replace(als, abs_tol=max(als.abs_tol, threshold))
    started = time.perf_counter()
    trace = SearchTrace()

    net = init_rank_one(dims, [config.rng_seed, 0], config.init_scale)
    net, history = optimize(net, spec, als)
    current = history[-1]
    trace.records.append(_record(0, None, net, current, spec, started, holdout))
    if callback:
        callback(net, trace.records[-1])

    iteration = 0
    while True:
        if threshold is not None and current <= threshold:
            trace.status = "threshold-reached"
            break
        if iteration >= config.max_iterations:
            trace.status = "max-iterations"
            break
        iteration += 1
        try:
            if config.random_walk:
                edge = random_edge(net, config, [config.rng_seed, iteration, 1 << 20])
                scores = {}
                explored = {edge: _explore(net, spec, config, iteration, edge)}
            else:
                explored = _explore_all(net, spec, config, iteration)
                scores = {e: v for e, (_, v) in explored.items()}
                edge = _select(net, spec, config, scores)
        except BudgetExhausted:
            trace.status = "budget-exhausted"
            break

        if config.transfer_weights:
            # previous cores plus the explored new slices
            start = explored[edge][0]
        else:
            i, j = edge
            ranks = np.array(net.ranks)
            ranks[i, j] += 1
            ranks[j, i] += 1
            start = random_network(
                net.dims, ranks, [config.rng_seed, iteration, 1 << 21], config.init_scale
            )
        net, history = optimize(start, spec, als)
        current = history[-1]

        splits = []
        if config.enable_split:
            net, splits = split_nodes(net, config.split_threshold)
            if splits:
                current = loss(net, spec)
        trace.records.append(
            _record(iteration, edge, net, current, spec, started, holdout, scores, splits)
        )
        logger.info(
            "iteration %d: edge %s, loss %.3e, params %d",
            iteration, edge, current, trace.records[-1].params,
        )
        if callback:
            callback(net, trace.records[-1])
    return net, trace
