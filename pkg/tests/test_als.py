import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from greedy_tn.als import (
    AlsConfig,
    LossSpec,
    ObservationSet,
    StaleStateError,
    _solve_core,
    als_sweep,
    loss,
    optimize,
    optimize_new_slices,
    update_core,
)
from greedy_tn.network import evaluate, init_rank_one, random_network, ranks_from_edges
from greedy_tn.targets import tt_tensor
from greedy_tn.transfer import SliceInitPolicy, increment_edge


def masked_spec(t, rng, fraction=0.5):
    mask = rng.random(t.shape) < fraction
    mask.flat[0] = True
    return LossSpec.masked(ObservationSet.from_mask(t, mask))


def design_matrix(net, k):
    """Columns = evaluate(net) with core k set to each unit tensor."""
    core = net.cores[k]
    cols = []
    for e in range(core.size):
        unit = np.zeros(core.size)
        unit[e] = 1.0
        cols.append(evaluate(net.with_core(k, unit.reshape(core.shape))).ravel())
    return np.stack(cols, axis=1)


def test_observation_set_validation():
    with pytest.raises(ValueError):
        ObservationSet(np.zeros((0, 2), int), [], (2, 2))
    with pytest.raises(ValueError):
        ObservationSet([[0, 0], [0, 0]], [1, 2], (2, 2))
    with pytest.raises(ValueError):
        ObservationSet([[0, 2]], [1], (2, 2))
    with pytest.raises(ValueError):
        LossSpec("huber", target=np.ones(2))
    with pytest.raises(ValueError):
        AlsConfig(max_sweeps=0)


def test_loss_examples(rng):
    net = random_state(rng, p=3)
    w = evaluate(net)
    assert loss(net, LossSpec.full(w)) == 0
    t = rng.standard_normal(net.dims)
    full = loss(net, LossSpec.full(t))
    assert full == pytest.approx(np.sum((t - w) ** 2), rel=1e-13)
    everything = LossSpec.masked(ObservationSet.from_mask(t, np.ones(t.shape, bool)))
    assert loss(net, everything) == pytest.approx(full / t.size, rel=1e-13)
    with pytest.raises(ValueError):
        loss(net, LossSpec.full(np.ones((9, 9, 9, 9))))


def test_loss_with_internal_node(rng):
    ranks = ranks_from_edges(4, {(0, 3): 2, (1, 3): 2, (2, 3): 2})
    net = random_network([3, 4, 2, 1], ranks, rng)
    t = rng.standard_normal((3, 4, 2))
    assert loss(net, LossSpec.full(t)) == pytest.approx(np.sum((evaluate(net)[..., 0] - t) ** 2))


def test_fixed_point(rng):
    net = random_state(rng, p=3)
    spec = LossSpec.full(evaluate(net))
    swept = als_sweep(net, spec)
    assert loss(swept, spec) < 1e-24


def test_rank_one_recovery(rng):
    vecs = [rng.standard_normal(d) for d in (4, 3, 5)]
    t = np.einsum("a,b,c->abc", *vecs)
    net, history = optimize(init_rank_one(t.shape, 0), LossSpec.full(t), AlsConfig(max_sweeps=20))
    assert history[-1] < 1e-10


def test_optimize_tt_target():
    t = tt_tensor([5] * 4, [2, 3, 2], 0)
    ranks = ranks_from_edges(4, {(0, 1): 2, (1, 2): 3, (2, 3): 2})
    net, history = optimize(random_network([5] * 4, ranks, 1), LossSpec.full(t))
    assert np.sqrt(history[-1] / np.sum(t**2)) < 1e-6
    assert all(b <= a * (1 + 1e-10) + 1e-30 for a, b in zip(history, history[1:]))


def test_optimize_already_optimal(rng):
    net = random_state(rng, p=3)
    spec = LossSpec.full(evaluate(net))
    _, history = optimize(net, spec)
    assert 1 <= len(history) <= 2
    assert max(history) < 1e-24


def check_monotone(net, spec):
    before = loss(net, spec)
    scale = max(before, spec.target_energy())
    for k in range(net.p):
        net, after = update_core(net, k, spec)
        assert after <= before + 1e-10 * scale
        assert after == pytest.approx(loss(net, spec), rel=1e-9, abs=1e-12 * scale)
        before = after


def test_per_core_monotonicity_100_instances():
    rng = np.random.default_rng(3)
    for _ in range(100):
        net = random_state(rng, min_p=2, max_p=4, max_dim=4)
        t = rng.standard_normal(net.dims)
        check_monotone(net, LossSpec.full(t))
        check_monotone(net, masked_spec(t, rng))


@given(st.integers(0, 10_000))
def test_history_non_increasing(seed):
    rng = np.random.default_rng(seed)
    net = random_state(rng, min_p=2, max_p=4, max_dim=4)
    spec = masked_spec(rng.standard_normal(net.dims), rng) if seed % 2 else LossSpec.full(
        rng.standard_normal(net.dims)
    )
    start = loss(net, spec)
    _, history = optimize(net, spec, AlsConfig(max_sweeps=10))
    seq = [start] + history
    assert all(b <= a + 1e-10 * seq[0] for a, b in zip(seq, seq[1:]))


@given(st.integers(0, 10_000))
def test_core_update_matches_explicit_least_squares(seed):
    rng = np.random.default_rng(seed)
    net = random_state(rng, min_p=2, max_p=3, max_dim=3, max_rank=2)
    t = rng.standard_normal(net.dims)
    k = int(rng.integers(net.p))
    a = design_matrix(net, k)
    x, *_ = np.linalg.lstsq(a, t.ravel(), rcond=None)
    updated, _ = update_core(net, k, LossSpec.full(t))
    np.testing.assert_allclose(
        evaluate(updated).ravel(), a @ x, rtol=1e-10, atol=1e-10 * np.linalg.norm(t)
    )
    # masked: same check restricted to observed rows
    spec = masked_spec(t, rng)
    flat = np.ravel_multi_index(spec.observations.indices.T, t.shape)
    x, *_ = np.linalg.lstsq(a[flat], t.ravel()[flat], rcond=None)
    updated, _ = update_core(net, k, spec)
    np.testing.assert_allclose(
        evaluate(updated).ravel()[flat], a[flat] @ x, rtol=1e-10, atol=1e-10 * np.linalg.norm(t)
    )


def test_rank_deficient_system_flags_state():
    net = init_rank_one([3, 3], 0)
    zero = net.with_core(1, np.zeros((1, 3)))
    updated, _ = update_core(zero, 0, LossSpec.full(np.ones((3, 3))))
    assert updated.ill_conditioned


def test_ridge_solution_is_close(rng):
    net = random_state(rng, p=3)
    t = rng.standard_normal(net.dims)
    plain, _ = update_core(net, 0, LossSpec.full(t))
    ridged, _ = update_core(net, 0, LossSpec.full(t), AlsConfig(ridge=1e-10))
    assert loss(ridged, LossSpec.full(t)) == pytest.approx(loss(plain, LossSpec.full(t)), rel=1e-6)


def tt_fixture():
    t = tt_tensor([4] * 4, [2, 2, 2], 11)
    # optimal for ranks (2, 1, 2); needs the (1, 2) increment to fit exactly
    ranks = ranks_from_edges(4, {(0, 1): 2, (2, 3): 2})
    net, _ = optimize(random_network([4] * 4, ranks, 2), LossSpec.full(t))
    return t, net


def test_restricted_update_drops_loss():
    t, net = tt_fixture()
    spec = LossSpec.full(t)
    before = loss(net, spec)
    grown = increment_edge(net, 1, 2, SliceInitPolicy(), 0)
    after_noise = loss(grown, spec)
    explored, after = optimize_new_slices(grown, (1, 2), spec, iters=2)
    assert after < before
    assert after <= after_noise
    assert explored.last_increment == (1, 2)


def test_restricted_update_freezes_old_entries():
    t, net = tt_fixture()
    grown = increment_edge(net, 1, 2, SliceInitPolicy(), 0)
    explored, _ = optimize_new_slices(grown, (1, 2), LossSpec.full(t), iters=3)
    for k in range(4):
        if k in (1, 2):
            mode = 3 - k
            n_old = grown.cores[k].shape[mode] - 1
            np.testing.assert_array_equal(
                np.take(explored.cores[k], range(n_old), axis=mode),
                np.take(grown.cores[k], range(n_old), axis=mode),
            )
        else:
            np.testing.assert_array_equal(explored.cores[k], grown.cores[k])


def test_restricted_update_keeps_exact_fit(rng):
    net = random_state(rng, p=3)
    spec = LossSpec.full(evaluate(net))
    grown = increment_edge(net, 0, 1, SliceInitPolicy(), 1)
    _, after = optimize_new_slices(grown, (0, 1), spec, iters=2)
    assert after <= 1e-9 * spec.target_energy()


def test_restricted_update_requires_fresh_increment(rng):
    net = random_state(rng, p=3)
    spec = LossSpec.full(evaluate(net))
    with pytest.raises(StaleStateError):
        optimize_new_slices(net, (0, 1), spec, iters=1)
    grown = increment_edge(net, 0, 1, SliceInitPolicy(), 1)
    with pytest.raises(StaleStateError):
        optimize_new_slices(grown, (0, 2), spec, iters=1)
    swept = als_sweep(grown, spec)
    with pytest.raises(StaleStateError):
        optimize_new_slices(swept, (0, 1), spec, iters=1)


def test_restricted_masked_update(rng):
    t, net = tt_fixture()
    spec = masked_spec(t, rng, 0.4)
    grown = increment_edge(net, 1, 2, SliceInitPolicy(), 0)
    start = loss(grown, spec)
    _, after = optimize_new_slices(grown, (1, 2), spec, iters=2)
    assert after <= start * (1 + 1e-10)


def test_solve_core_restricted_columns(rng):
    net = random_state(rng, p=3, max_rank=2)
    grown = increment_edge(net, 0, 2, SliceInitPolicy(), 3)
    t = rng.standard_normal(net.dims)
    core, _, _ = _solve_core(grown, 0, LossSpec.full(t), 0.0, grown_mode=2)
    n_old = grown.cores[0].shape[2] - 1
    np.testing.assert_array_equal(core[:, :, :n_old], grown.cores[0][:, :, :n_old])
