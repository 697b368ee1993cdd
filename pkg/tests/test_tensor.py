import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storyanchor import tensor as T
from storyanchor.errors import ShapeError


def arr(*xs):
    return np.array(xs, dtype=np.float64)


class TestForward:
    def test_add_sub_mul(self):
        a, b = T.Tensor(arr(1, 2, 3)), T.Tensor(arr(4, 5, 6))
        np.testing.assert_array_equal(T.add(a, b).data, arr(5, 7, 9))
        np.testing.assert_array_equal(T.sub(a, b).data, arr(-3, -3, -3))
        np.testing.assert_array_equal(T.mul(a, b).data, arr(4, 10, 18))

    def test_relu(self):
        x = T.Tensor(arr(-2, -0.5, 0, 0.5, 2))
        np.testing.assert_array_equal(T.relu(x).data, arr(0, 0, 0, 0.5, 2))

    def test_sigmoid_midpoint(self):
        assert T.sigmoid(T.Tensor(arr(0))).data[0] == pytest.approx(0.5, abs=1e-15)

    def test_tanh_odd(self):
        x = arr(0.3, -1.2, 2.0)
        np.testing.assert_allclose(T.tanh(T.Tensor(x)).data,
                                   -T.tanh(T.Tensor(-x)).data, atol=1e-15)

    def test_matmul_matrix_vector(self):
        W = T.Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        v = T.Tensor(arr(5, 6))
        np.testing.assert_array_equal(T.matmul(W, v).data, arr(17, 39))

    def test_cross_entropy_uniform(self):
        # Equal logits over 4 classes: loss is log(4) for any target.
        logits = T.Tensor(arr(0, 0, 0, 0))
        assert T.softmax_cross_entropy(logits, 2).data[()] == pytest.approx(
            math.log(4.0), abs=1e-12)

    def test_cross_entropy_confident(self):
        logits = T.Tensor(arr(10, 0))
        expected = math.log(1.0 + math.exp(-10.0))
        assert T.softmax_cross_entropy(logits, 0).data[()] == pytest.approx(
            expected, rel=1e-12)

    def test_log_softmax_normalizes(self):
        lp = T.log_softmax(arr(1.0, -2.0, 0.3, 4.0))
        assert np.exp(lp).sum() == pytest.approx(1.0, abs=1e-12)

    def test_mse(self):
        p = T.Tensor(arr(1, 2, 3))
        t = T.Tensor(arr(1, 4, 6))
        # mean of (0, 4, 9)
        assert T.mse(p, t).data[()] == pytest.approx(13.0 / 3.0, abs=1e-12)

    def test_concat_slice_roundtrip(self):
        a, b = T.Tensor(arr(1, 2)), T.Tensor(arr(3, 4, 5))
        c = T.concat([a, b])
        np.testing.assert_array_equal(c.data, arr(1, 2, 3, 4, 5))
        np.testing.assert_array_equal(T.slice_(c, slice(2, 5)).data, b.data)

    def test_rows(self):
        tab = T.Tensor(np.arange(12, dtype=np.float64).reshape(4, 3))
        picked = T.rows(tab, [3, 0])
        np.testing.assert_array_equal(picked.data,
                                      np.array([[9.0, 10, 11], [0, 1, 2]]))

    def test_matmul_shape_error(self):
        with pytest.raises(ShapeError):
            T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones(2)))


class TestBackward:
    def test_add_grad_accumulates_for_shared_input(self):
        x = T.Tensor(arr(1.5))
        y = T.sum_(T.add(x, x))
        y.backward()
        assert x.grad[0] == pytest.approx(2.0)

    def test_rows_repeated_index_accumulates(self):
        tab = T.Tensor(np.ones((3, 2)))
        y = T.sum_(T.rows(tab, [1, 1, 1]))
        y.backward()
        np.testing.assert_array_equal(tab.grad,
                                      np.array([[0.0, 0], [3, 3], [0, 0]]))

    def test_nan_detection(self):
        x = T.Tensor(arr(1e308))
        with np.errstate(over="ignore"), pytest.raises(FloatingPointError):
            T.mul(x, x)


GRAD_CASES = {
    "add": lambda p: T.sum_(T.add(p["a"], p["b"])),
    "sub": lambda p: T.sum_(T.sub(p["a"], p["b"])),
    "mul": lambda p: T.sum_(T.mul(p["a"], p["b"])),
    "matmul": lambda p: T.sum_(T.matmul(p["W"], p["a"])),
    "tanh": lambda p: T.sum_(T.tanh(p["a"])),
    "sigmoid": lambda p: T.sum_(T.sigmoid(p["a"])),
    "relu": lambda p: T.sum_(T.relu(p["a"])),
    "mse": lambda p: T.mse(p["a"], p["b"]),
    "ce": lambda p: T.softmax_cross_entropy(T.matmul(p["W"], p["a"]), 1),
    "concat": lambda p: T.sum_(T.mul(T.concat([p["a"], p["b"]]),
                                     T.concat([p["b"], p["a"]]))),
    "rows": lambda p: T.sum_(T.rows(p["W"], [0, 2, 0])),
}


@pytest.mark.parametrize("name", sorted(GRAD_CASES))
def test_grad_check_primitives(name):
    rng = np.random.default_rng(hash(name) % (2**32))
    params = {
        "a": T.Tensor(rng.normal(size=5) + 0.1),   # offset keeps relu off its kink
        "b": T.Tensor(rng.normal(size=5) + 0.1),
        "W": T.Tensor(rng.normal(size=(3, 5))),
    }
    err = T.grad_check(lambda: GRAD_CASES[name](params), params)
    assert err < 1e-6, f"{name}: rel err {err}"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6),
       st.integers(min_value=0, max_value=5))
def test_cross_entropy_grad_property(values, target):
    target = target % len(values)
    logits = T.Tensor(np.array(values, dtype=np.float64))
    err = T.grad_check(
        lambda: T.softmax_cross_entropy(logits, target), {"l": logits})
    assert err < 1e-6


def test_backward_is_deterministic():
    rng = np.random.default_rng(3)
    W = T.Tensor(rng.normal(size=(4, 4)))
    x = T.Tensor(rng.normal(size=4))

    def run():
        W.zero_grad()
        x.zero_grad()
        T.softmax_cross_entropy(T.matmul(W, T.tanh(T.matmul(W, x))), 2).backward()
        return W.grad.copy(), x.grad.copy()

    g1, g2 = run(), run()
    np.testing.assert_array_equal(g1[0], g2[0])
    np.testing.assert_array_equal(g1[1], g2[1])
