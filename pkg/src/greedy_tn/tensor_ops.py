"""Dense tensor algebra: pairwise contraction, matricization, mode products.

Dense tensors are plain ``numpy.ndarray`` objects of dtype float64 stored in
C (row-major) order. Scalars are order-0 arrays.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence

import numpy as np


class ContractionShapeError(ValueError):
    """Raised when paired modes do not have matching sizes."""


class InvalidBipartitionError(ValueError):
    """Raised when a matricization row set is empty, full or malformed."""


class OracleTooLargeError(ValueError):
    """Raised when the brute-force evaluator would exceed its work cap."""


def as_tensor(data, dims: Sequence[int] | None = None) -> np.ndarray:
    """Return ``data`` as a C-ordered float64 array, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise ValueError(f"mode sizes must be >= 1, got {dims}")
        if arr.size != int(np.prod(dims, dtype=np.int64)):
            raise ValueError(
                f"data has {arr.size} entries but dims {dims} need "
                f"{int(np.prod(dims, dtype=np.int64))}"
            )
        arr = arr.reshape(dims)
    return arr


def contract_pair(
    a: np.ndarray, b: np.ndarray, pairing: Sequence[tuple[int, int]]
) -> np.ndarray:
    """Contract ``a`` and ``b`` over the given ``(mode_a, mode_b)`` pairs.

    The result has the free modes of ``a`` (in order) followed by the free
    modes of ``b`` (in order). An empty pairing gives the outer product.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    axes_a = [int(m) for m, _ in pairing]
    axes_b = [int(m) for _, m in pairing]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ContractionShapeError(f"mode paired twice in {list(pairing)}")
    for ma, mb in zip(axes_a, axes_b):
        if not (0 <= ma < a.ndim and 0 <= mb < b.ndim):
            raise ContractionShapeError(
                f"pair ({ma}, {mb}) out of range for orders {a.ndim}, {b.ndim}"
            )
        if a.shape[ma] != b.shape[mb]:
            raise ContractionShapeError(
                f"mode {ma} of a has size {a.shape[ma]} but mode {mb} of b "
                f"has size {b.shape[mb]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def matricize(t: np.ndarray, row_modes: Sequence[int]) -> np.ndarray:
    """Unfold ``t`` into a matrix with ``row_modes`` indexing the rows.

    Rows run row-major over ``row_modes`` in the given order; columns run
    row-major over the remaining modes in ascending order.
    """
    t = np.asarray(t)
    rows = [int(m) for m in row_modes]
    if not rows or len(rows) >= t.ndim:
        raise InvalidBipartitionError(
            f"row modes {rows} must be a non-empty strict subset of "
            f"{t.ndim} modes"
        )
    if len(set(rows)) != len(rows) or any(not 0 <= m < t.ndim for m in rows):
        raise InvalidBipartitionError(f"invalid row modes {rows}")
    cols = [m for m in range(t.ndim) if m not in rows]
    n_rows = int(np.prod([t.shape[m] for m in rows], dtype=np.int64))
    return np.transpose(t, rows + cols).reshape(n_rows, -1)


def unmatricize(
    m: np.ndarray, row_modes: Sequence[int], dims: Sequence[int]
) -> np.ndarray:
    """Inverse of :func:`matricize` for a tensor of shape ``dims``."""
    rows = [int(r) for r in row_modes]
    cols = [k for k in range(len(dims)) if k not in rows]
    perm = rows + cols
    folded = np.asarray(m).reshape([dims[k] for k in perm])
    return np.transpose(folded, np.argsort(perm))


def mode_n_product(t: np.ndarray, m: np.ndarray, n: int) -> np.ndarray:
    """Mode-``n`` product ``t x_n m``: mode ``n`` of size J becomes rows(m)."""
    t = np.asarray(t, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or not 0 <= n < t.ndim or m.shape[1] != t.shape[n]:
        raise ContractionShapeError(
            f"cannot multiply mode {n} of shape {t.shape} by matrix {m.shape}"
        )
    out = np.tensordot(m, t, axes=([1], [n]))
    return np.moveaxis(out, 0, n)


def inner(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractionShapeError(f"inner product of {a.shape} and {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def frobenius(t: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(t, dtype=np.float64).ravel()))


def brute_force_tn_eval(
    cores: Sequence[np.ndarray], max_work: int = 2_000_000
) -> np.ndarray:
    """Evaluate a tensor network by explicit nested summation.

    ``cores[k]`` has one mode per node; mode ``k`` is the dangling leg and
    mode ``j`` is the bond to node ``j``. Every output entry is the sum over
    all bond indices of the product of core entries. Slow by design: this is
    a test oracle and is never used by the optimizers.
    """
    p = len(cores)
    dims = tuple(int(c.shape[k]) for k, c in enumerate(cores))
    bonds = [(i, j) for i in range(p) for j in range(i + 1, p)]
    sizes = [int(cores[i].shape[j]) for i, j in bonds]
    work = int(np.prod(dims, dtype=np.int64)) * int(np.prod(sizes, dtype=np.int64))
    if work * max(p, 1) > max_work:
        raise OracleTooLargeError(f"brute-force work {work * p} exceeds cap {max_work}")

    out = np.zeros(dims)
    for out_idx in itertools.product(*(range(d) for d in dims)):
        total = 0.0
        for bond_idx in itertools.product(*(range(s) for s in sizes)):
            label = dict(zip(bonds, bond_idx))
            prod = 1.0
            for k in range(p):
                idx = tuple(
                    out_idx[k] if j == k else label[(min(j, k), max(j, k))]
                    for j in range(p)
                )
                prod *= cores[k][idx]
            total += prod
        out[out_idx] = total
    return out
