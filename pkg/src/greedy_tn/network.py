"""Tensor-network data model and contraction.

A network on ``p`` nodes is a list of ``p`` cores, each of order ``p``. Mode
``k`` of core ``k`` is its dangling leg (size ``dims[k]``) and mode ``j != k``
is the bond to node ``j`` (size ``ranks[k, j]``). A bond of size 1 is the same
as no edge. Internal nodes are nodes whose dangling leg has size 1.
"""

from __future__ import annotations

from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "TensorNetwork",
    "contract_network",
    "random_network",
    "init_rank_one",
    "evaluate",
    "param_count",
    "edge_list",
    "augment_singletons",
    "remove_singletons",
    "ranks_from_edges",
]


def _pairwise(a, la, b, lb, keep):
    """Contract two labelled tensors; labels in ``keep`` are not summed."""
    shared = [x for x in la if x in lb]
    batch = [x for x in shared if x in keep]
    summed = [x for x in shared if x not in keep]
    free_a = [x for x in la if x not in shared]
    free_b = [x for x in lb if x not in shared]
    size_a = dict(zip(la, a.shape))
    size_b = dict(zip(lb, b.shape))

    def _prod(labels, sizes):
        return int(np.prod([sizes[x] for x in labels], dtype=np.int64))

    nb, nfa, nfb, ns = (
        _prod(batch, size_a),
        _prod(free_a, size_a),
        _prod(free_b, size_b),
        _prod(summed, size_a),
    )
    am = np.transpose(a, [la.index(x) for x in batch + free_a + summed])
    bm = np.transpose(b, [lb.index(x) for x in batch + summed + free_b])
    out = np.matmul(am.reshape(nb, nfa, ns), bm.reshape(nb, ns, nfb))
    shape = (
        [size_a[x] for x in batch]
        + [size_a[x] for x in free_a]
        + [size_b[x] for x in free_b]
    )
    return out.reshape(shape), batch + free_a + free_b


def contract_network(
    tensors: Sequence[np.ndarray],
    labels: Sequence[Sequence[Hashable]],
    output: Sequence[Hashable],
) -> np.ndarray:
    """Contract labelled tensors down to the ``output`` label order.

    A label shared by two tensors and absent from ``output`` is summed. A
    label listed in ``output`` and carried by several tensors acts as a batch
    index. Pairs are contracted greedily, always picking the pair with the
    smallest intermediate result (ties: smallest position pair). Size-1 modes
    are dropped up front and restored in the final reshape.
    """
    sizes: dict[Hashable, int] = {}
    ts, ls = [], []
    for t, lab in zip(tensors, labels):
        t = np.asarray(t, dtype=np.float64)
        lab = list(lab)
        if t.ndim != len(lab):
            raise ValueError(f"tensor of order {t.ndim} given labels {lab}")
        for x, s in zip(lab, t.shape):
            if sizes.setdefault(x, s) != s:
                raise ValueError(f"label {x!r} used with sizes {sizes[x]} and {s}")
        keep_axes = [ax for ax, s in enumerate(t.shape) if s != 1]
        ts.append(t.reshape([t.shape[ax] for ax in keep_axes]))
        ls.append([lab[ax] for ax in keep_axes])
    out_shape = [sizes.get(x, 1) for x in output]
    out_set = set(output)

    if not ts:
        return np.ones(out_shape)

    while len(ts) > 1:
        best = None
        for a in range(len(ts)):
            for b in range(a + 1, len(ts)):
                others = set()
                for c, lab in enumerate(ls):
                    if c != a and c != b:
                        others.update(lab)
                la, lb = ls[a], ls[b]
                res = [x for x in la if x not in lb or x in out_set or x in others]
                res += [x for x in lb if x not in la]
                cost = int(np.prod([sizes[x] for x in res], dtype=np.int64))
                if best is None or cost < best[0]:
                    best = (cost, a, b)
        _, a, b = best
        keep = set(out_set)
        for c, lab in enumerate(ls):
            if c != a and c != b:
                keep.update(lab)
        t, lab = _pairwise(ts[a], ls[a], ts[b], ls[b], keep)
        ts[a], ls[a] = t, lab
        del ts[b], ls[b]

    t, lab = ts[0], ls[0]
    # labels never shared (e.g. a lone dangling leg missing from output) are summed
    extra = [ax for ax, x in enumerate(lab) if x not in out_set]
    if extra:
        t = t.sum(axis=tuple(extra))
        lab = [x for x in lab if x in out_set]
    order = [lab.index(x) for x in output if x in lab]
    return np.transpose(t, order).reshape(out_shape)


def _bond(i: int, j: int) -> tuple:
    return ("b", min(i, j), max(i, j))


def _dangle(k: int) -> tuple:
    return ("d", k)


def core_labels(k: int, p: int) -> list[tuple]:
    return [_dangle(k) if j == k else _bond(k, j) for j in range(p)]


@dataclass(frozen=True, eq=False)
class TensorNetwork:
    """Immutable tensor-network state: the cores fix both structure and values.

    ``last_increment`` records the edge grown by the most recent rank
    increment (cleared by any other update), and ``ill_conditioned`` flags
    that a least-squares update fell back to a minimum-norm solve.
    """

    cores: tuple[np.ndarray, ...]
    last_increment: tuple[int, int] | None = None
    ill_conditioned: bool = False
    _ranks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cores = tuple(np.ascontiguousarray(c, dtype=np.float64) for c in self.cores)
        p = len(cores)
        if p == 0:
            raise ValueError("a tensor network needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != p:
                raise ValueError(f"core {k} has order {c.ndim}, expected {p}")
        ranks = np.ones((p, p), dtype=np.int64)
        for i in range(p):
            for j in range(i + 1, p):
                if cores[i].shape[j] != cores[j].shape[i]:
                    raise ValueError(
                        f"bond ({i}, {j}) has size {cores[i].shape[j]} on core {i} "
                        f"but {cores[j].shape[i]} on core {j}"
                    )
                ranks[i, j] = ranks[j, i] = cores[i].shape[j]
        for c in cores:
            c.flags.writeable = False
        ranks.flags.writeable = False
        object.__setattr__(self, "cores", cores)
        object.__setattr__(self, "_ranks", ranks)

    @property
    def p(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(c.shape[k]) for k, c in enumerate(self.cores))

    @property
    def ranks(self) -> np.ndarray:
        """Symmetric ``p x p`` rank matrix with unit diagonal (read-only)."""
        return self._ranks

    def with_cores(self, cores, **kwargs) -> "TensorNetwork":
        kwargs.setdefault("last_increment", None)
        kwargs.setdefault("ill_conditioned", False)
        return replace(self, cores=tuple(cores), **kwargs)

    def with_core(self, k: int, core: np.ndarray, **kwargs) -> "TensorNetwork":
        cores = list(self.cores)
        cores[k] = core
        return self.with_cores(cores, **kwargs)


def random_network(
    dims: Sequence[int],
    ranks: np.ndarray,
    rng: np.random.Generator | int | None = None,
    scale: float = 0.5,
) -> TensorNetwork:
    """Network with the given structure and i.i.d. uniform(-scale, scale) cores."""
    rng = np.random.default_rng(rng)
    dims = [int(d) for d in dims]
    ranks = np.asarray(ranks, dtype=np.int64)
    p = len(dims)
    if p == 0:
        raise ValueError("dims must be non-empty")
    if any(d < 1 for d in dims):
        raise ValueError(f"dims must be >= 1, got {dims}")
    if ranks.shape != (p, p) or not np.array_equal(ranks, ranks.T):
        raise ValueError("ranks must be a symmetric p x p matrix")
    cores = []
    for k in range(p):
        shape = [dims[k] if j == k else int(ranks[k, j]) for j in range(p)]
        cores.append(rng.uniform(-scale, scale, size=shape))
    return TensorNetwork(tuple(cores))


def init_rank_one(
    dims: Sequence[int], rng_seed: int | None = None, scale: float = 0.5
) -> TensorNetwork:
    if len(dims) == 0:
        raise ValueError("dims must be non-empty")
    return random_network(dims, np.ones((len(dims),) * 2, dtype=np.int64), rng_seed, scale)


def ranks_from_edges(p: int, edges) -> np.ndarray:
    """Rank matrix from a ``{(i, j): rank}`` mapping or ``(i, j, rank)`` list."""
    if isinstance(edges, dict):
        edges = [(i, j, r) for (i, j), r in edges.items()]
    ranks = np.ones((p, p), dtype=np.int64)
    for i, j, r in edges:
        if i == j:
            raise ValueError("self-loops are not allowed")
        ranks[i, j] = ranks[j, i] = int(r)
    return ranks


def evaluate(net: TensorNetwork) -> np.ndarray:
    """Full tensor represented by ``net``; internal nodes keep their size-1 mode."""
    p = net.p
    return contract_network(
        net.cores, [core_labels(k, p) for k in range(p)], [_dangle(k) for k in range(p)]
    )


def environment(net: TensorNetwork, k: int) -> np.ndarray:
    """Contraction of every core except ``k``.

    Modes: the bonds of node ``k`` (ascending neighbour index), then the
    dangling legs of the other nodes (ascending).
    """
    p = net.p
    others = [m for m in range(p) if m != k]
    out = [_bond(k, j) for j in others] + [_dangle(m) for m in others]
    return contract_network(
        [net.cores[m] for m in others], [core_labels(m, p) for m in others], out
    )


def observed_environment(net: TensorNetwork, k: int, indices: np.ndarray) -> np.ndarray:
    """Per-observation environment of node ``k``.

    ``indices`` is an ``(n, p)`` integer array. Returns shape ``(n, *bonds)``
    where ``bonds`` are the bond sizes of node ``k`` in ascending neighbour
    order.
    """
    p = net.p
    others = [m for m in range(p) if m != k]
    tensors, labels = [], []
    for m in others:
        sliced = np.take(net.cores[m], indices[:, m], axis=m)
        tensors.append(np.moveaxis(sliced, m, 0))
        labels.append(["n"] + [_bond(m, j) for j in range(p) if j != m])
    out = ["n"] + [_bond(k, j) for j in others]
    if not tensors:
        return np.ones((indices.shape[0],) + (1,) * (p - 1))
    env = contract_network(tensors, labels, out)
    return env.reshape((indices.shape[0],) + env.shape[1:])


def evaluate_at(net: TensorNetwork, indices: np.ndarray) -> np.ndarray:
    """Entries of the represented tensor at the rows of ``indices``."""
    p = net.p
    tensors, labels = [], []
    for m in range(p):
        sliced = np.take(net.cores[m], indices[:, m], axis=m)
        tensors.append(np.moveaxis(sliced, m, 0))
        labels.append(["n"] + [_bond(m, j) for j in range(p) if j != m])
    return contract_network(tensors, labels, ["n"]).reshape(indices.shape[0])


def param_count(net: TensorNetwork) -> int:
    """``sum_i d_i * prod_{j != i} R_ij``, the number of stored core entries."""
    return int(sum(c.size for c in net.cores))


def edge_list(net: TensorNetwork, include_unit: bool = False) -> list[tuple[int, int, int]]:
    """``(i, j, R_ij)`` for ``i < j`` in lexicographic order.

    Unit-rank pairs (no edge) are skipped unless ``include_unit`` is set.
    """
    r = net.ranks
    return [
        (i, j, int(r[i, j]))
        for i in range(net.p)
        for j in range(i + 1, net.p)
        if include_unit or r[i, j] > 1
    ]


def augment_singletons(t: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Insert size-1 modes so they end up at ``positions`` of the result."""
    shape = list(np.shape(t))
    for pos in sorted(positions):
        if not 0 <= pos <= len(shape):
            raise ValueError(f"cannot insert a mode at position {pos}")
        shape.insert(pos, 1)
    return np.reshape(t, shape)


def remove_singletons(t: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`augment_singletons`."""
    shape = list(np.shape(t))
    for pos in sorted(positions, reverse=True):
        if shape[pos] != 1:
            raise ValueError(f"mode {pos} has size {shape[pos]}, not 1")
        del shape[pos]
    return np.reshape(t, shape)
