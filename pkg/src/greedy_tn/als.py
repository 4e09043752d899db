"""Alternating least squares for tensor networks.

Two losses are supported: the squared Frobenius distance to a dense target
and the mean squared error over a set of observed entries. Each core update
solves the exact least-squares problem for that core with every other core
held fixed; the restricted variant only re-solves the slices added by the
last rank increment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .network import (
    TensorNetwork,
    environment,
    evaluate,
    evaluate_at,
    observed_environment,
)
from .tensor_ops import matricize, unmatricize

logger = logging.getLogger(__name__)


class StaleStateError(ValueError):
    """The network was not produced by an increment of the requested edge."""


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Observed entries of a tensor of shape ``dims``.

    ``indices`` is an ``(n, len(dims))`` integer array of distinct in-bounds
    multi-indices and ``values`` the matching observed values.
    """

    indices: np.ndarray
    values: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        dims = tuple(int(d) for d in self.dims)
        if idx.ndim != 2 or idx.shape[1] != len(dims):
            raise ValueError(f"indices must have shape (n, {len(dims)}), got {idx.shape}")
        if idx.shape[0] == 0:
            raise ValueError("an observation set must be non-empty")
        if idx.shape[0] != vals.shape[0]:
            raise ValueError(f"{idx.shape[0]} indices but {vals.shape[0]} values")
        if (idx < 0).any() or (idx >= np.array(dims)).any():
            raise ValueError("observation index out of bounds")
        flat = np.ravel_multi_index(idx.T, dims)
        if np.unique(flat).size != flat.size:
            raise ValueError("observation indices must be unique")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @classmethod
    def from_mask(cls, tensor: np.ndarray, mask: np.ndarray) -> "ObservationSet":
        idx = np.argwhere(mask)
        return cls(idx, tensor[tuple(idx.T)], tensor.shape)


@dataclass(frozen=True, eq=False)
class LossSpec:
    """Either ``kind="full"`` with a dense ``target`` or ``kind="masked"``."""

    kind: str
    target: np.ndarray | None = None
    observations: ObservationSet | None = None

    def __post_init__(self):
        if self.kind == "full":
            if self.target is None:
                raise ValueError("full loss needs a target tensor")
            object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64))
        elif self.kind == "masked":
            if self.observations is None:
                raise ValueError("masked loss needs observations")
        else:
            raise ValueError(f"unknown loss kind {self.kind!r}")

    @classmethod
    def full(cls, target) -> "LossSpec":
        return cls("full", target=target)

    @classmethod
    def masked(cls, observations: ObservationSet) -> "LossSpec":
        return cls("masked", observations=observations)

    @property
    def dims(self) -> tuple[int, ...]:
        if self.kind == "full":
            return tuple(self.target.shape)
        return self.observations.dims

    def target_energy(self) -> float:
        """Loss of the zero tensor."""
        if self.kind == "full":
            return float(np.sum(self.target**2))
        return float(np.mean(self.observations.values**2))

    def loss_for_relative_error(self, rel: float) -> float:
        """Loss value matching relative error ``rel`` on the fitted entries."""
        return rel**2 * self.target_energy()


@dataclass(frozen=True)
class AlsConfig:
    max_sweeps: int = 200
    rel_improvement_tol: float = 1e-8
    # damping of each core correction, relative to the mean diagonal of the Gram matrix
    ridge: float = 0.0
    # stop as soon as the loss drops to this value
    abs_tol: float = 0.0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.rel_improvement_tol < 0 or self.ridge < 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be >= 0")


def _mode_map(net_dims, target_dims) -> list[int | None]:
    """For each network mode, the target mode it carries (None for singletons)."""
    big_t = [m for m, d in enumerate(target_dims) if d != 1]
    out, it = [], iter(big_t)
    for d in net_dims:
        if d == 1:
            out.append(None)
            continue
        m = next(it, None)
        if m is None or target_dims[m] != d:
            raise ValueError(f"network dims {tuple(net_dims)} incompatible with {tuple(target_dims)}")
        out.append(m)
    if next(it, None) is not None:
        raise ValueError(f"network dims {tuple(net_dims)} incompatible with {tuple(target_dims)}")
    return out


def _net_indices(net: TensorNetwork, obs: ObservationSet) -> np.ndarray:
    cols = _mode_map(net.dims, obs.dims)
    idx = np.zeros((len(obs), net.p), dtype=np.int64)
    for k, m in enumerate(cols):
        if m is not None:
            idx[:, k] = obs.indices[:, m]
    return idx


def _net_target(net: TensorNetwork, spec: LossSpec) -> np.ndarray:
    _mode_map(net.dims, spec.dims)
    return spec.target.reshape(net.dims)


def loss(net: TensorNetwork, spec: LossSpec) -> float:
    """Squared Frobenius error (full) or mean squared error on observations."""
    if spec.kind == "full":
        resid = _net_target(net, spec) - evaluate(net)
        return float(np.sum(resid**2))
    pred = evaluate_at(net, _net_indices(net, spec.observations))
    return float(np.mean((pred - spec.observations.values) ** 2))


def _lstsq(a, b, ridge):
    """Solve ``min ||a x - b||`` (plus a relative ``ridge`` on ``||x||^2``).

    Returns ``(x, degenerate)``; without ridge, rank-deficient systems get the
    minimum-norm solution and ``degenerate`` is set.
    """
    if ridge > 0:
        gram = a.T @ a
        scale = np.trace(gram) / gram.shape[0]
        gram[np.diag_indices_from(gram)] += ridge * (scale if scale > 0 else 1.0)
        try:
            factor = scipy.linalg.cho_factor(gram, check_finite=False)
            return scipy.linalg.cho_solve(factor, a.T @ b, check_finite=False), False
        except np.linalg.LinAlgError:
            pass
    x, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    return x, rank < a.shape[1]


def _bond_columns(core: np.ndarray, k: int, grown_mode: int | None) -> np.ndarray:
    """Boolean mask over the columns of ``matricize(core, [k])``.

    With ``grown_mode`` set, selects the columns whose index along that mode
    is the last one; otherwise selects every column.
    """
    bond_shape = [s for j, s in enumerate(core.shape) if j != k]
    n_cols = int(np.prod(bond_shape, dtype=np.int64))
    if grown_mode is None:
        return np.ones(n_cols, dtype=bool)
    pos = grown_mode - (grown_mode > k)
    along = np.indices(bond_shape)[pos].ravel()
    return along == bond_shape[pos] - 1


def _as_matrix(core, k):
    if core.ndim == 1:
        return core.reshape(-1, 1)
    return matricize(core, [k])


def _from_matrix(g, k, shape):
    if len(shape) == 1:
        return g.reshape(shape)
    return unmatricize(g, [k], shape)


def _solve_core(
    net: TensorNetwork,
    k: int,
    spec: LossSpec,
    ridge: float,
    grown_mode: int | None = None,
) -> tuple[np.ndarray, float, bool]:
    """Least-squares update of core ``k`` (or only its newest slice).

    Returns the new core, the loss after the update and a degeneracy flag.
    """
    core = net.cores[k]
    g = _as_matrix(core, k).copy()
    cols = _bond_columns(core, k, grown_mode)
    degenerate = False

    # solve for the correction to the current entries: on rank-deficient
    # systems the minimum-norm correction leaves the null-space part as is,
    # so the loss can never go up
    if spec.kind == "full":
        target = _net_target(net, spec)
        t_k = _as_matrix(target, k)
        env = environment(net, k).reshape(g.shape[1], -1)
        resid = t_k - g @ env
        x, degenerate = _lstsq(env[cols].T, resid.T, ridge)
        g[:, cols] += x.T
        resid = t_k - g @ env
        new_loss = float(np.sum(resid**2))
    else:
        obs = spec.observations
        idx = _net_indices(net, obs)
        env = observed_environment(net, k, idx).reshape(len(obs), -1)
        rows_k = idx[:, k]
        resid = obs.values - np.einsum("nb,nb->n", g[rows_k], env)
        for v in range(g.shape[0]):
            sel = rows_k == v
            if not sel.any():
                continue
            x, deg = _lstsq(env[sel][:, cols], resid[sel], ridge)
            g[v, cols] += x
            degenerate |= deg
        pred = np.einsum("nb,nb->n", g[rows_k], env)
        new_loss = float(np.mean((pred - obs.values) ** 2))

    return _from_matrix(g, k, core.shape), new_loss, degenerate


def update_core(
    net: TensorNetwork, k: int, spec: LossSpec, config: AlsConfig = AlsConfig()
) -> tuple[TensorNetwork, float]:
    """Replace core ``k`` by its least-squares optimum; return (network, loss)."""
    core, new_loss, degenerate = _solve_core(net, k, spec, config.ridge)
    flag = net.ill_conditioned or degenerate
    return net.with_core(k, core, ill_conditioned=flag), new_loss


def als_sweep(
    net: TensorNetwork, spec: LossSpec, config: AlsConfig = AlsConfig()
) -> TensorNetwork:
    """Update cores ``0..p-1`` in order."""
    return _sweep(net, spec, config)[0]


def balance(net: TensorNetwork) -> TensorNetwork:
    """Rescale cores to equal Frobenius norms; the represented tensor is unchanged."""
    norms = np.array([np.linalg.norm(c) for c in net.cores])
    if net.p == 1 or not np.all(norms > 0):
        return net
    target = np.exp(np.mean(np.log(norms)))
    cores = [c * (target / n) for c, n in zip(net.cores, norms)]
    return net.with_cores(cores, ill_conditioned=net.ill_conditioned)


def _sweep(net, spec, config):
    net = net.with_cores(net.cores)
    current = None
    for k in range(net.p):
        net, current = update_core(net, k, spec, config)
    return balance(net), current


def optimize(
    net: TensorNetwork, spec: LossSpec, config: AlsConfig = AlsConfig()
) -> tuple[TensorNetwork, list[float]]:
    """Run ALS sweeps until the relative improvement falls below tolerance.

    Returns the final network and the loss after each sweep.
    """
    prev = loss(net, spec)
    history: list[float] = []
    if prev <= config.abs_tol:
        history.append(prev)
        return net.with_cores(net.cores), history
    for _ in range(config.max_sweeps):
        net, current = _sweep(net, spec, config)
        history.append(current)
        if current <= config.abs_tol or prev - current <= config.rel_improvement_tol * prev:
            break
        prev = current
    if net.ill_conditioned:
        logger.debug("ALS used minimum-norm solves on rank-deficient systems")
    return net, history


def optimize_new_slices(
    net: TensorNetwork,
    edge: tuple[int, int],
    spec: LossSpec,
    iters: int,
    ridge: float = AlsConfig.ridge,
) -> tuple[TensorNetwork, float]:
    """Alternately re-solve only the slices added by the last increment of ``edge``.

    Every other core entry stays frozen. Returns the network and the final loss.
    """
    i, j = min(edge), max(edge)
    if net.last_increment != (i, j):
        raise StaleStateError(
            f"last increment was {net.last_increment}, not edge {(i, j)}"
        )
    if iters < 1:
        raise ValueError("iters must be >= 1")
    current = loss(net, spec)
    flag = net.ill_conditioned
    for _ in range(iters):
        for k, grown in ((i, j), (j, i)):
            core, current, deg = _solve_core(net, k, spec, ridge, grown_mode=grown)
            flag |= deg
            net = net.with_core(k, core, last_increment=(i, j), ill_conditioned=flag)
    return net, current
