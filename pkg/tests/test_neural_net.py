import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msptsne.neural_net import (AdamState, Gradients, ModelFormatError, MlpModel, adam_step,
                                backward, deserialize_model, forward, init_mlp,
                                serialize_model)


def chain_oracle(model, x):
    a = x
    for l in range(len(model.weights)):
        z = np.zeros((a.shape[0], model.weights[l].shape[1]))
        for r in range(a.shape[0]):
            for c in range(z.shape[1]):
                z[r, c] = sum(a[r, k] * model.weights[l][k, c] for k in range(a.shape[1]))
                z[r, c] += model.biases[l][c]
        a = z if l == len(model.weights) - 1 else np.where(z > 0, z, 0.0)
    return a


def quadratic_loss(y, target):
    return 0.5 * float(np.sum((y - target) ** 2) + np.sum(y ** 3) / 10)


def quadratic_grad(y, target):
    return (y - target) + 0.15 * y ** 2


def fd_check(model, x, target, step=1e-6):
    """Max relative error between backprop and central differences, skipping kinks."""
    y, cache = forward(model, x)
    grads = backward(model, cache, quadratic_grad(y, target))
    kinks = any(np.any(np.abs(z) < 1e-7) for z in cache.pre_acts[:-1])
    assert not kinks
    worst = 0.0
    for p, g in zip(model.parameters(), grads.parameters()):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            lp = quadratic_loss(forward(model, x)[0], target)
            p[idx] = old - step
            lm = quadratic_loss(forward(model, x)[0], target)
            p[idx] = old
            fd = (lp - lm) / (2 * step)
            err = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-6)
            worst = max(worst, err)
    return worst


# -- init ---------------------------------------------------------------------------

def test_init_deterministic():
    a, b = init_mlp([3, 5, 2], seed=4), init_mlp([3, 5, 2], seed=4)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_init_shapes():
    m = init_mlp([3, 4, 2], seed=0)
    assert [w.shape for w in m.weights] == [(3, 4), (4, 2)]
    assert [b.shape for b in m.biases] == [(4,), (2,)]
    assert all(np.all(b == 0) for b in m.biases)
    assert np.all(np.abs(m.weights[0]) <= math.sqrt(6 / 3))


def test_init_seed_sensitivity():
    assert not np.array_equal(init_mlp([3, 4, 2], 1).weights[0], init_mlp([3, 4, 2], 2).weights[0])


@pytest.mark.parametrize("dims", [[3, 2], [3, 0, 2], []])
def test_init_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        init_mlp(dims)


# -- forward --------------------------------------------------------------------------

def test_forward_zero_model():
    m = init_mlp([3, 4, 4, 2], 0)
    for w, b in zip(m.weights, m.biases):
        w[:] = 0
        b[:] = 0
    y, _ = forward(m, np.ones((5, 3)))
    assert np.all(y == 0)


def test_forward_relu_kills_negative():
    m = MlpModel([1, 1, 1], [np.array([[1.0]]), np.array([[1.0]])],
                 [np.zeros(1), np.zeros(1)])
    y, cache = forward(m, np.array([[-5.0]]))
    assert cache.acts[0][0, 0] == 0.0
    assert y[0, 0] == 0.0


def test_forward_matches_chain_oracle():
    rng = np.random.default_rng(0)
    m = init_mlp([4, 6, 5, 3], 1)
    for b in m.biases:
        b[:] = rng.normal(size=b.shape)
    x = rng.normal(size=(7, 4))
    np.testing.assert_allclose(forward(m, x)[0], chain_oracle(m, x), rtol=0, atol=1e-12)


def test_forward_dim_mismatch():
    with pytest.raises(ValueError, match="expects 3"):
        forward(init_mlp([3, 4, 2]), np.ones((2, 4)))


def test_forward_batches_independent():
    m = init_mlp([5, 7, 7, 3], 2)
    x = np.random.default_rng(1).normal(size=(20, 5))
    whole = forward(m, x)[0]
    parts = np.vstack([forward(m, x[:6])[0], forward(m, x[6:])[0]])
    np.testing.assert_allclose(whole, parts, rtol=0, atol=1e-12)
    assert np.array_equal(forward(m, x)[0], whole)


# -- backward ---------------------------------------------------------------------------

def test_backward_zero_upstream():
    m = init_mlp([3, 4, 2], 0)
    y, cache = forward(m, np.ones((3, 3)))
    g = backward(m, cache, np.zeros_like(y))
    assert all(np.all(p == 0) for p in g.parameters())


def test_backward_scalar_linear():
    # y = relu(x * 1) * w with x > 0 reduces to y = w x: dL/dw = g x
    m = MlpModel([1, 1, 1], [np.array([[1.0]]), np.array([[2.5]])], [np.zeros(1), np.zeros(1)])
    x = np.array([[3.0]])
    _, cache = forward(m, x)
    g = backward(m, cache, np.array([[0.7]]))
    assert g.weights[1][0, 0] == pytest.approx(0.7 * 3.0)
    assert g.biases[1][0] == pytest.approx(0.7)


def test_backward_shape_mismatch():
    m = init_mlp([3, 4, 2], 0)
    _, cache = forward(m, np.ones((3, 3)))
    with pytest.raises(ValueError):
        backward(m, cache, np.zeros((3, 3)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_backward_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = init_mlp([5, 7, 7, 3], seed)
    for b in m.biases:
        b[:] = rng.normal(scale=0.1, size=b.shape)
    x = rng.normal(size=(6, 5))
    _, cache = forward(m, x)
    if any(np.any(np.abs(z) < 1e-7) for z in cache.pre_acts[:-1]):
        return
    assert fd_check(m, x, rng.normal(size=(6, 3))) <= 1e-4


def test_relu_subgradient_at_zero():
    # pre-activation exactly 0 must block the gradient
    m = MlpModel([1, 1, 1], [np.array([[1.0]]), np.array([[1.0]])], [np.zeros(1), np.zeros(1)])
    _, cache = forward(m, np.array([[0.0]]))
    g = backward(m, cache, np.array([[1.0]]))
    assert g.weights[0][0, 0] == 0.0 and g.biases[0][0] == 0.0


# -- adam -----------------------------------------------------------------------------

def _scalar_model(w):
    return MlpModel([1, 1, 1], [np.array([[w]]), np.array([[1.0]])], [np.zeros(1), np.zeros(1)])


def _scalar_grads(g):
    return Gradients([np.array([[g]]), np.zeros((1, 1))], [np.zeros(1), np.zeros(1)])


def test_adam_zero_gradient():
    m = init_mlp([2, 3, 1], 0)
    before = m.copy()
    st_ = AdamState()
    grads = Gradients([np.zeros_like(w) for w in m.weights], [np.zeros_like(b) for b in m.biases])
    adam_step(m, grads, st_)
    assert st_.t == 1
    for a, b in zip(m.parameters(), before.parameters()):
        assert np.array_equal(a, b)


def test_adam_first_step_magnitude():
    m = _scalar_model(1.0)
    adam_step(m, _scalar_grads(-3.0), AdamState(lr=0.01))
    assert m.weights[0][0, 0] == pytest.approx(1.0 + 0.01, rel=1e-6)


def test_adam_three_step_oracle():
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    w_ref, mom, vel = 2.0, 0.0, 0.0
    m = _scalar_model(2.0)
    state = AdamState(lr=lr)
    for t in range(1, 4):
        g = 2.0 * w_ref                      # d/dw of w^2
        mom = b1 * mom + (1 - b1) * g
        vel = b2 * vel + (1 - b2) * g * g
        w_ref -= lr * (mom / (1 - b1 ** t)) / (math.sqrt(vel / (1 - b2 ** t)) + eps)
        adam_step(m, _scalar_grads(2.0 * m.weights[0][0, 0]), state)
        assert m.weights[0][0, 0] == pytest.approx(w_ref, abs=1e-12)
    assert state.t == 3


def test_adam_rejects_nonfinite():
    m = _scalar_model(1.0)
    with pytest.raises(FloatingPointError, match="layer 0 weights"):
        adam_step(m, _scalar_grads(float("nan")), AdamState())


# -- serialization ------------------------------------------------------------------------

def test_roundtrip_bitwise():
    m = init_mlp([5, 7, 2000, 3, 2], 9)
    m.biases[1][:] = np.random.default_rng(0).normal(size=2000)
    r = deserialize_model(serialize_model(m))
    assert r.layer_dims == m.layer_dims
    for a, b in zip(m.parameters(), r.parameters()):
        assert a.tobytes() == b.tobytes()


def test_format_layout():
    m = init_mlp([2, 3, 1], 0)
    data = serialize_model(m)
    assert data[:4] == b"MSPT"
    assert struct.unpack_from("<II", data, 4) == (1, 2)
    assert struct.unpack_from("<3I", data, 12) == (2, 3, 1)
    first = struct.unpack_from("<d", data, 24)[0]
    assert first == m.weights[0][0, 0]
    body = data[24:-8]
    assert struct.unpack("<Q", data[-8:])[0] == sum(body) % 2 ** 64
    assert len(body) == 8 * (2 * 3 + 3 + 3 * 1 + 1)


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: b"XXXX" + d[4:], "magic"),
    (lambda d: d[:4] + struct.pack("<I", 99) + d[8:], "version"),
    (lambda d: d[:-20], "size"),
    (lambda d: d[:30] + bytes([d[30] ^ 1]) + d[31:], "checksum"),
    (lambda d: d[:6], "truncated"),
])
def test_corrupt_files_rejected(mutate, msg):
    data = serialize_model(init_mlp([2, 3, 1], 0))
    with pytest.raises(ModelFormatError, match=msg):
        deserialize_model(mutate(data))
