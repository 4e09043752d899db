"""Synthetic targets: random networks of known structure and a smooth image."""

from __future__ import annotations

import numpy as np

from .network import TensorNetwork, evaluate, random_network, ranks_from_edges

# edge ranks of the 7^5 benchmark targets; "tucker" uses an extra internal node 5
TARGET_EDGES = {
    "tt": {(0, 1): 2, (1, 2): 3, (2, 3): 6, (3, 4): 5},
    "tr": {(0, 1): 2, (1, 2): 3, (2, 3): 4, (3, 4): 5, (0, 4): 5},
    "triangle": {(0, 1): 5, (1, 2): 2, (2, 3): 5, (1, 4): 2, (2, 4): 2},
    "tucker": {(0, 5): 2, (1, 5): 3, (2, 5): 4, (3, 5): 3, (4, 5): 2},
}


def target_network(name: str, rng_seed=None, d: int = 7, scale: float = 0.5) -> TensorNetwork:
    """Random network with one of the benchmark structures on ``d^5``."""
    if name not in TARGET_EDGES:
        raise ValueError(f"unknown target {name!r}; choose from {sorted(TARGET_EDGES)}")
    dims = [d] * 5 + ([1] if name == "tucker" else [])
    ranks = ranks_from_edges(len(dims), TARGET_EDGES[name])
    return random_network(dims, ranks, rng_seed, scale)


def target_tensor(name: str, rng_seed=None, d: int = 7) -> np.ndarray:
    """Dense ``d^5`` tensor of a benchmark target (internal node contracted away)."""
    return evaluate(target_network(name, rng_seed, d)).reshape([d] * 5)


def tt_tensor(dims, ranks, rng_seed=None, scale: float = 0.5) -> np.ndarray:
    """Dense tensor with exact TT ranks ``ranks`` (length ``len(dims) - 1``)."""
    if len(ranks) != len(dims) - 1:
        raise ValueError("need one rank per adjacent pair of modes")
    edges = {(k, k + 1): r for k, r in enumerate(ranks)}
    return evaluate(random_network(dims, ranks_from_edges(len(dims), edges), rng_seed, scale))


def smooth_image(height: int, width: int, channels: int = 3, rng_seed=None) -> np.ndarray:
    """Synthetic photo-like image in [0, 1]: low-frequency waves plus blobs and edges."""
    rng = np.random.default_rng(rng_seed)
    y, x = np.meshgrid(np.linspace(0, 1, height), np.linspace(0, 1, width), indexing="ij")
    img = np.zeros((height, width, channels))
    for c in range(channels):
        layer = np.zeros((height, width))
        for _ in range(6):
            fx, fy = rng.uniform(0.5, 3.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            layer += rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * (fx * x + fy * y) + phase)
        for _ in range(3):
            cx, cy, w = rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.2)
            layer += rng.uniform(1, 2) * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * w**2))
        layer += 0.8 * (x + 0.3 * y > rng.uniform(0.4, 0.8))
        img[..., c] = layer
    img -= img.min()
    return img / img.max()
