import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nftdrain import nn


def test_identity_affine():
    W = nn.Parameter(np.eye(3))
    X = np.array([[1.0, -2.0, 3.0]])
    assert np.array_equal(nn.affine(W, X), X)
    dY = np.array([[0.5, 0.25, -1.0]])
    assert np.array_equal(nn.affine_backward(W, X, dY), dY)


def test_affine_two_by_two():
    W = nn.Parameter([[1.0, 2.0], [3.0, 4.0]])
    assert nn.affine(W, np.array([[5.0, 6.0]])).tolist() == [[17.0, 39.0]]


def test_affine_shape_mismatch():
    with pytest.raises(nn.ShapeMismatch):
        nn.affine(nn.Parameter(np.ones((2, 3))), np.ones((1, 2)))
    with pytest.raises(nn.ShapeMismatch):
        nn.affine_backward(nn.Parameter(np.ones((2, 3))), np.ones((1, 3)), np.ones((1, 3)))


def test_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        nn.as_matrix([[1.0, np.nan]])
    with pytest.raises(nn.ShapeMismatch):
        nn.as_matrix(np.ones((2, 2, 2)))


def test_activation_values():
    assert nn.leaky_relu(np.array(-1.0), 0.2) == pytest.approx(-0.2)
    assert nn.relu(np.array([-1.0, 2.0])).tolist() == [0.0, 2.0]
    assert nn.softmax(np.full((1, 4), 7.0)).tolist() == [[0.25] * 4]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=1, max_size=8))
def test_softmax_rows_sum_to_one(row):
    s = nn.softmax(np.array([row]))
    assert np.all(np.isfinite(s)) and abs(s.sum() - 1.0) < 1e-12


def test_mean_pool():
    assert nn.mean_pool([[1.0, 2.0]]).tolist() == [[1.0, 2.0]]
    assert nn.mean_pool([[0.0, 2.0], [2.0, 0.0]]).tolist() == [[1.0, 1.0]]
    with pytest.raises(nn.EmptyPool):
        nn.mean_pool(np.zeros((0, 2)))


def test_cross_entropy_values():
    loss, _ = nn.cross_entropy(np.zeros((1, 2)), [0])
    assert loss == pytest.approx(math.log(2))
    loss, _ = nn.cross_entropy(np.array([[20.0, 0.0]]), [0])
    assert loss < 1e-8
    with pytest.raises(nn.ShapeMismatch):
        nn.cross_entropy(np.zeros((2, 2)), [0])
    with pytest.raises(nn.ShapeMismatch):
        nn.cross_entropy(np.zeros((1, 2)), [2])


def test_adam_zero_gradient_leaves_value():
    p = nn.Parameter([[1.5, -2.0]])
    nn.adam_step([p], 0.1)
    assert p.value.tolist() == [[1.5, -2.0]] and p.step == 1


def test_adam_descends_quadratic():
    p = nn.Parameter([[1.0]])
    p.grad[...] = 2 * p.value
    nn.adam_step([p], 0.1)
    assert p.value[0, 0] < 1.0 and p.grad[0, 0] == 0.0


def test_adam_three_step_trace():
    p = nn.Parameter([[1.0]])
    w, m, v = 1.0, 0.0, 0.0
    b1, b2, lr, eps = 0.9, 0.999, 0.1, 1e-8
    for t in range(1, 4):
        g = 2 * w
        p.grad[...] = 2 * p.value
        nn.adam_step([p], lr)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        assert p.value[0, 0] == pytest.approx(w, abs=1e-15)


# ------------------------------------------------------------------ gradient checks

def _check_elementwise(fwd, bwd, x):
    p = nn.Parameter(x)
    g = np.random.default_rng(0).normal(size=x.shape)

    def closure():
        y = fwd(p.value)
        p.grad += bwd(p.value, g)
        return float((y * g).sum())
    return nn.grad_check(closure, [p])


def test_activation_backwards(rng):
    x = rng.normal(size=(3, 4))
    x[np.abs(x) < 0.05] = 0.3   # keep away from the kinks
    assert _check_elementwise(nn.relu, nn.relu_backward, x) < 1e-6
    assert _check_elementwise(nn.leaky_relu, nn.leaky_relu_backward, x) < 1e-6
    assert _check_elementwise(nn.softmax, lambda v, g: nn.softmax_backward(nn.softmax(v), g), x) < 1e-6


def test_mean_pool_backward(rng):
    x = rng.normal(size=(5, 3))
    g = rng.normal(size=(1, 3))
    p = nn.Parameter(x)

    def closure():
        p.grad += nn.mean_pool_backward(5, g)
        return float((nn.mean_pool(p.value) * g).sum())
    assert nn.grad_check(closure, [p]) < 1e-6


def test_affine_backward_random_5x4(rng):
    W = nn.Parameter(rng.normal(size=(5, 4)))
    Xp = nn.Parameter(rng.normal(size=(3, 4)))
    g = rng.normal(size=(3, 5))

    def closure():
        Y = nn.affine(W, Xp.value)
        Xp.grad += nn.affine_backward(W, Xp.value, g)
        return float((Y * g).sum())
    assert nn.grad_check(closure, [W, Xp]) < 1e-6


def test_affine_cross_entropy_check(rng):
    W = nn.Parameter(rng.normal(size=(2, 6)))
    X = rng.normal(size=(8, 6))
    y = rng.integers(0, 2, size=8)
    w = rng.uniform(0.5, 2, size=8)

    def closure():
        loss, d = nn.cross_entropy(nn.affine(W, X), y, w)
        nn.affine_backward(W, X, d)
        return loss
    assert nn.grad_check(closure, [W]) < 1e-4


def test_constant_closure_zero_error():
    p = nn.Parameter(np.ones((2, 2)))
    assert nn.grad_check(lambda: 3.0, [p]) == 0.0


def test_non_deterministic_closure():
    p = nn.Parameter(np.ones((1, 1)))
    calls = iter(range(100))
    with pytest.raises(nn.NonDeterministicClosure):
        nn.grad_check(lambda: float(next(calls)), [p])


def test_glorot_range(rng):
    W = nn.glorot(rng, 64, 11)
    assert np.abs(W).max() <= math.sqrt(6 / 75)


def test_checkpoint_roundtrip(tmp_path, rng):
    arrays = {"a": rng.normal(size=(3, 4)), "b.c": np.arange(5.0), "s": np.ones((1, 1))}
    nn.save_checkpoint(tmp_path / "x.ckpt", arrays)
    data = (tmp_path / "x.ckpt").read_bytes()
    assert data[:4] == nn.CHECKPOINT_MAGIC
    back = nn.load_checkpoint(tmp_path / "x.ckpt")
    assert list(back) == list(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
    (tmp_path / "bad").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        nn.load_checkpoint(tmp_path / "bad")
