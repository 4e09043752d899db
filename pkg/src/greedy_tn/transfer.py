"""Weight transfer: grow one bond by one while keeping the represented tensor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import TensorNetwork


@dataclass(frozen=True)
class SliceInitPolicy:
    """How the new slice of a grown bond is filled.

    ``mode="zeros"`` reproduces the previous tensor exactly. ``mode="uniform"``
    draws i.i.d. entries from ``[-sigma, sigma]`` to break the symmetry that
    zero slices impose on the alternating updates.
    """

    mode: str = "uniform"
    sigma: float = 1e-3

    def __post_init__(self):
        if self.mode not in ("zeros", "uniform"):
            raise ValueError(f"unknown slice policy {self.mode!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if (self.sigma == 0) != (self.mode == "zeros"):
            raise ValueError("sigma must be 0 exactly when mode is 'zeros'")

    @classmethod
    def zeros(cls) -> "SliceInitPolicy":
        return cls("zeros", 0.0)


def add_slice(
    core: np.ndarray,
    mode: int,
    policy: SliceInitPolicy,
    rng_seed=None,
    dangling_mode: int | None = None,
) -> np.ndarray:
    """Append one slice at the end of ``mode``; existing entries are untouched."""
    core = np.asarray(core, dtype=np.float64)
    if not 0 <= mode < core.ndim:
        raise ValueError(f"mode {mode} out of range for order {core.ndim}")
    if dangling_mode is not None and mode == dangling_mode:
        raise ValueError(f"mode {mode} is the dangling leg and cannot be grown")
    shape = list(core.shape)
    shape[mode] = 1
    if policy.mode == "zeros":
        new = np.zeros(shape)
    else:
        new = np.random.default_rng(rng_seed).uniform(-policy.sigma, policy.sigma, size=shape)
    return np.concatenate([core, new], axis=mode)


def increment_edge(
    net: TensorNetwork,
    i: int,
    j: int,
    policy: SliceInitPolicy,
    rng_seed=None,
) -> TensorNetwork:
    """Return ``net`` with ``R_ij`` raised by one via :func:`add_slice` on both ends."""
    if i == j:
        raise ValueError("cannot increment a self-loop")
    if not (0 <= i < net.p and 0 <= j < net.p):
        raise ValueError(f"edge ({i}, {j}) out of range for {net.p} nodes")
    i, j = min(i, j), max(i, j)
    seeds = np.random.SeedSequence(_seed_entropy(rng_seed)).spawn(2)
    cores = list(net.cores)
    cores[i] = add_slice(cores[i], j, policy, np.random.default_rng(seeds[0]), dangling_mode=i)
    cores[j] = add_slice(cores[j], i, policy, np.random.default_rng(seeds[1]), dangling_mode=j)
    return net.with_cores(cores, last_increment=(i, j))


def _seed_entropy(seed):
    if seed is None:
        return None
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return [int(s) for s in seed]
