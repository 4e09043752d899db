import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from greedy_tn.network import (
    TensorNetwork,
    augment_singletons,
    core_labels,
    edge_list,
    evaluate,
    evaluate_at,
    init_rank_one,
    param_count,
    random_network,
    ranks_from_edges,
    remove_singletons,
)
from greedy_tn.targets import TARGET_EDGES, target_network
from greedy_tn.tensor_ops import brute_force_tn_eval, mode_n_product
from greedy_tn.transfer import SliceInitPolicy, increment_edge


def sequential_eval(net):
    """Right-to-left contraction with einsum, a different order from evaluate."""
    p = net.p
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    names = {lab: next(letters) for k in range(p) for lab in core_labels(k, p)}
    acc, acc_labels = net.cores[-1], core_labels(p - 1, p)
    for k in range(p - 2, -1, -1):
        lab = core_labels(k, p)
        merged = list(dict.fromkeys(lab + acc_labels))
        spec = "".join(names[x] for x in lab) + "," + "".join(names[x] for x in acc_labels)
        spec += "->" + "".join(names[x] for x in merged)
        acc = np.einsum(spec, net.cores[k], acc)
        acc_labels = merged
    out = [core_labels(k, p)[k] for k in range(p)]
    bonds = [x for x in acc_labels if x not in out]
    acc = acc.sum(axis=tuple(acc_labels.index(x) for x in bonds)) if bonds else acc
    kept = [x for x in acc_labels if x in out]
    return np.transpose(acc, [kept.index(x) for x in out])


def test_init_rank_one():
    net = init_rank_one([7] * 5, 3)
    assert net.p == 5 and param_count(net) == 35
    assert np.all(net.ranks[~np.eye(5, dtype=bool)] == 1)
    same = init_rank_one([7] * 5, 3)
    other = init_rank_one([7] * 5, 4)
    assert all(np.array_equal(a, b) for a, b in zip(net.cores, same.cores))
    assert not np.array_equal(net.cores[0], other.cores[0])
    assert all(np.all(np.abs(c) <= 0.5) for c in net.cores)
    w = evaluate(net)
    vecs = [c.ravel() for c in net.cores]
    np.testing.assert_allclose(w, np.einsum("a,b,c,d,e->abcde", *vecs), atol=1e-15)
    with pytest.raises(ValueError):
        init_rank_one([], 0)


def test_evaluate_matches_brute_force_100_instances():
    rng = np.random.default_rng(0)
    for _ in range(100):
        net = random_state(rng, max_p=4)
        ref = brute_force_tn_eval(net.cores)
        assert np.max(np.abs(evaluate(net) - ref)) <= 1e-12


def test_tt_pattern_is_chain_of_matrix_products(rng):
    dims = [3, 4, 2, 3]
    net = random_network(dims, ranks_from_edges(4, {(0, 1): 2, (1, 2): 3, (2, 3): 2}), rng)
    a = net.cores[0].reshape(3, 2)
    b = net.cores[1].reshape(2, 4, 3)
    c = net.cores[2].reshape(3, 2, 2)
    d = net.cores[3].reshape(2, 3)
    ref = np.zeros(dims)
    for idx in np.ndindex(*dims):
        i, j, k, l = idx
        ref[idx] = a[i] @ b[:, j, :] @ c[:, k, :] @ d[:, l]
    np.testing.assert_allclose(evaluate(net), ref, atol=1e-13)


def test_tucker_emulation_equals_mode_products(rng):
    ranks = ranks_from_edges(4, {(0, 3): 2, (1, 3): 3, (2, 3): 2})
    net = random_network([4, 5, 3, 1], ranks, rng)
    g = net.cores[3].reshape(2, 3, 2)
    us = [net.cores[0].reshape(4, 2), net.cores[1].reshape(5, 3), net.cores[2].reshape(3, 2)]
    ref = g
    for n, u in enumerate(us):
        ref = mode_n_product(ref, u, n)
    w = evaluate(net)
    assert w.shape == (4, 5, 3, 1)
    np.testing.assert_allclose(w[..., 0], ref, atol=1e-13)


def test_param_count_examples():
    tt = target_network("tt", 0)
    assert param_count(tt) == 7 * 2 + 2 * 7 * 3 + 3 * 7 * 6 + 6 * 7 * 5 + 5 * 7 == 427
    ring = random_network([3] * 4, ranks_from_edges(4, {(0, 1): 2, (1, 2): 2, (2, 3): 2, (0, 3): 2}), 0)
    assert param_count(ring) == 48
    assert param_count(init_rank_one([2, 5, 3], 0)) == 10


@given(st.integers(0, 10_000))
def test_param_count_matches_formula(seed):
    net = random_state(np.random.default_rng(seed), max_p=5)
    r = net.ranks
    formula = sum(
        net.dims[i] * int(np.prod([r[i, j] for j in range(net.p) if j != i]))
        for i in range(net.p)
    )
    assert param_count(net) == formula == sum(c.size for c in net.cores)


def test_singletons_round_trip():
    t = np.arange(6.0).reshape(2, 3)
    a = augment_singletons(t, [0])
    assert a.shape == (1, 2, 3)
    np.testing.assert_array_equal(a.ravel(), t.ravel())
    b = augment_singletons(t, [0, 2, 4])
    assert b.shape == (1, 2, 1, 3, 1)
    np.testing.assert_array_equal(remove_singletons(b, [0, 2, 4]), t)
    with pytest.raises(ValueError):
        remove_singletons(t, [0])


def test_tucker_target_uses_one_singleton_core():
    net = target_network("tucker", 0)
    assert [d for d in net.dims if d == 1] == [1]
    assert net.dims[-1] == 1


def test_edge_list():
    net = init_rank_one([2, 2, 2], 0)
    assert [(i, j) for i, j, _ in edge_list(net, include_unit=True)] == [(0, 1), (0, 2), (1, 2)]
    assert edge_list(net) == []
    grown = increment_edge(net, 0, 2, SliceInitPolicy.zeros())
    assert edge_list(grown) == [(0, 2, 2)]
    tri = target_network("triangle", 0)
    assert edge_list(tri) == sorted((i, j, r) for (i, j), r in TARGET_EDGES["triangle"].items())


@given(st.integers(0, 10_000))
def test_evaluate_is_order_independent(seed):
    net = random_state(np.random.default_rng(seed), min_p=2, max_p=4)
    np.testing.assert_allclose(evaluate(net), sequential_eval(net), atol=1e-12)


@given(st.integers(0, 10_000))
def test_rank_one_edges_equal_outer_product(seed):
    rng = np.random.default_rng(seed)
    net = random_state(rng, min_p=2, max_p=4)
    ranks = net.ranks.copy()
    ranks[0, :] = ranks[:, 0] = 1
    cut = random_network(net.dims, ranks, rng)
    rest = TensorNetwork(tuple(c[0] for c in cut.cores[1:]))
    ref = np.multiply.outer(cut.cores[0].ravel(), evaluate(rest))
    assert np.max(np.abs(evaluate(cut) - ref)) <= 1e-13


def test_evaluate_at_matches_dense(rng):
    net = random_state(rng, p=4)
    idx = np.stack([rng.integers(0, d, size=30) for d in net.dims], axis=1)
    np.testing.assert_allclose(evaluate_at(net, idx), evaluate(net)[tuple(idx.T)], atol=1e-13)


def test_inconsistent_cores_rejected():
    with pytest.raises(ValueError):
        TensorNetwork((np.ones((2, 3)), np.ones((2, 2))))
