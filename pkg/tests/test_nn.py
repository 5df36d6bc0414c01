import math

import numpy as np
import pytest

from oracles import finite_difference, max_relative_error
from pso_masac import serialization
from pso_masac.nn import (
    AdamState,
    GradBundle,
    Mlp,
    adam_step,
    backward,
    forward,
    load_mlp,
    mlp_from_bytes,
    mlp_to_bytes,
    save_mlp,
)


def hand_net(activation):
    net = Mlp([2, 3, 1], activation, rng=0)
    net.weights[0][:] = [[1.0, -1.0, 0.5], [2.0, 0.0, -1.0]]
    net.biases[0][:] = [0.1, 0.2, -0.3]
    net.weights[1][:] = [[1.0], [2.0], [-1.0]]
    net.biases[1][:] = [0.5]
    return net


def test_zero_net_gives_zero_output():
    net = Mlp([4, 5, 3], rng=0)
    for p in net.parameters():
        p[:] = 0.0
    assert np.array_equal(forward(net, np.arange(4.0)), np.zeros(3))


def test_identity_linear_layer():
    net = Mlp([3, 3], rng=0)
    net.weights[0][:] = np.eye(3)
    x = np.array([0.3, -1.2, 4.0])
    assert np.array_equal(forward(net, x), x)


def test_hand_computed_relu():
    # hidden pre-activations (2.1, -0.8, -0.3) -> relu (2.1, 0, 0) -> 2.1 + 0.5
    out = forward(hand_net("relu"), np.array([1.0, 0.5]))
    assert out.shape == (1,)
    assert abs(out[0] - 2.6) < 1e-12


def test_hand_computed_tanh():
    expected = math.tanh(2.1) + 2 * math.tanh(-0.8) - math.tanh(-0.3) + 0.5
    out = forward(hand_net("tanh"), np.array([1.0, 0.5]))
    assert abs(out[0] - expected) < 1e-12


def test_forward_batch_matches_rows():
    net = Mlp([4, 6, 2], "tanh", rng=1)
    xs = np.random.default_rng(0).normal(size=(5, 4))
    batch = forward(net, xs)
    for row, x in zip(batch, xs):
        np.testing.assert_allclose(row, forward(net, x), rtol=0, atol=1e-14)


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(Mlp([3, 2], rng=0), np.zeros(4))


def test_init_is_glorot_uniform_with_zero_bias():
    net = Mlp([50, 30, 10], rng=3)
    for w, b in zip(net.weights, net.biases):
        limit = math.sqrt(6.0 / sum(w.shape))
        assert np.all(np.abs(w) <= limit)
        assert np.abs(w).max() > 0.9 * limit
        assert not b.any()


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("activation", ["relu", "tanh"])
def test_backward_matches_finite_differences(seed, activation):
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(1, 7)) for _ in range(int(rng.integers(2, 5)))]
    net = Mlp(sizes, activation, rng=rng)
    for b in net.biases:
        b[:] = rng.normal(scale=0.3, size=b.shape)
    x = rng.normal(size=(3, sizes[0]))
    up = rng.normal(size=(3, sizes[-1]))
    grads = backward(net, x, up)

    def f():
        return float(np.sum(up * forward(net, x)))

    numeric = finite_difference(f, net.parameters() + [x])
    assert max_relative_error(grads.parameters() + [grads.input], numeric) < 1e-4


def test_zero_upstream_gives_zero_gradients():
    net = Mlp([3, 4, 2], rng=0)
    grads = backward(net, np.ones(3), np.zeros(2))
    for g in grads.parameters() + [grads.input]:
        assert not np.any(g)


def test_linear_weight_gradient_is_outer_product():
    net = Mlp([3, 2], rng=0)
    x = np.array([1.0, -2.0, 0.5])
    up = np.array([0.3, -0.7])
    grads = backward(net, x, up)
    np.testing.assert_array_equal(grads.weights[0], np.outer(x, up))
    np.testing.assert_array_equal(grads.biases[0], up)


def test_backward_upstream_mismatch():
    with pytest.raises(ValueError):
        backward(Mlp([3, 2], rng=0), np.ones(3), np.ones(3))


def _grads_like(net, value):
    return GradBundle([np.full_like(w, value) for w in net.weights],
                      [np.full_like(b, value) for b in net.biases], None)


def test_adam_zero_gradient_leaves_params():
    net = Mlp([3, 4, 2], rng=0)
    opt = AdamState.for_net(net)
    before = [p.copy() for p in net.parameters()]
    adam_step(net, _grads_like(net, 0.0), opt)
    assert opt.step == 1
    assert all(np.array_equal(a, b) for a, b in zip(before, net.parameters()))


def test_adam_zero_gradient_decays_moments():
    net = Mlp([3, 2], rng=0)
    opt = AdamState.for_net(net)
    for m, v in zip(opt.m, opt.v):
        m[:] = 1.0
        v[:] = 1.0
    adam_step(net, _grads_like(net, 0.0), opt)
    assert all(np.allclose(m, 0.9) for m in opt.m)
    assert all(np.allclose(v, 0.999) for v in opt.v)


def test_adam_first_step_is_signed_learning_rate():
    net = Mlp([3, 4, 2], rng=0)
    opt = AdamState.for_net(net, lr=1e-3)
    rng = np.random.default_rng(0)
    grads = GradBundle([rng.normal(size=w.shape) for w in net.weights],
                       [rng.normal(size=b.shape) for b in net.biases], None)
    before = [p.copy() for p in net.parameters()]
    adam_step(net, grads, opt)
    for p0, p1, g in zip(before, net.parameters(), grads.parameters()):
        np.testing.assert_allclose(p1 - p0, -1e-3 * np.sign(g), rtol=1e-6, atol=1e-12)


def test_adam_two_steps_differ_from_one_doubled():
    rng = np.random.default_rng(2)
    a = Mlp([3, 2], rng=0)
    b = a.copy()
    g = rng.normal(size=(3, 2)), rng.normal(size=2)
    oa, ob = AdamState.for_net(a), AdamState.for_net(b)
    one = GradBundle([g[0]], [g[1]], None)
    adam_step(a, one, oa)
    adam_step(a, one, oa)
    adam_step(b, GradBundle([2 * g[0]], [2 * g[1]], None), ob)
    assert not np.allclose(a.weights[0], b.weights[0])


def test_adam_rejects_non_finite():
    net = Mlp([2, 2], rng=0)
    with pytest.raises(ValueError):
        adam_step(net, _grads_like(net, np.nan), AdamState.for_net(net))


def test_mlp_checkpoint_round_trip(tmp_path):
    net = Mlp([5, 7, 3], "tanh", rng=4)
    data = mlp_to_bytes(net)
    back = mlp_from_bytes(data)
    assert back.sizes == net.sizes and back.activation == "tanh"
    for p, q in zip(net.parameters(), back.parameters()):
        assert p.tobytes() == q.tobytes()
    assert mlp_to_bytes(back) == data
    path = save_mlp(net, tmp_path / "net.ckpt")
    assert path.read_bytes() == data
    assert mlp_to_bytes(load_mlp(path)) == data


def test_checkpoint_rejects_garbage():
    data = mlp_to_bytes(Mlp([2, 2], rng=0))
    with pytest.raises(serialization.CheckpointError):
        mlp_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(serialization.CheckpointError):
        mlp_from_bytes(data[:-8])
    with pytest.raises(serialization.CheckpointError):
        serialization.loads(data, kind="agent")
