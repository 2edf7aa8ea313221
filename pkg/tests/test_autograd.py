"""Gradient-engine checks: every op against central finite differences."""

import numpy as np
import pytest

from danet.autograd import Tensor, exp, sigmoid, tanh


def numeric_grad(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of one array."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn(x)
        flat[i] = orig - h
        down = fn(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return g


def check_op(build, shape, seed=0, atol=1e-6):
    """Compare analytic and numeric gradients of scalar build(Tensor)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.2, 1.5, shape)  # positive, away from kinks
    t = Tensor(x.copy(), requires_grad=True)
    loss = build(t)
    loss.backward()
    numeric = numeric_grad(lambda arr: float(build(Tensor(arr)).data), x)
    np.testing.assert_allclose(t.grad, numeric, atol=atol)


class TestElementwiseOps:
    def test_add(self):
        check_op(lambda t: (t + t * 2.0).sum(), (3, 4))

    def test_sub_with_constant(self):
        c = np.arange(12.0).reshape(3, 4)
        check_op(lambda t: ((c - t) * (t - 1.0)).sum(), (3, 4))

    def test_mul_broadcast(self):
        row = np.linspace(0.5, 2.0, 4)[None, :]
        check_op(lambda t: (t * row).sum(), (3, 4))

    def test_div(self):
        check_op(lambda t: (1.0 / t + t / 3.0).sum(), (2, 5))

    def test_div_broadcast_denominator(self):
        check_op(lambda t: (t / t.sum(axis=1, keepdims=True)).sum(), (3, 4))

    def test_pow(self):
        check_op(lambda t: (t**3.0).sum(), (4,))

    def test_exp(self):
        check_op(lambda t: exp(t).sum(), (3, 3))

    def test_tanh(self):
        check_op(lambda t: tanh(t * 2.0).sum(), (3, 3))

    def test_sigmoid(self):
        check_op(lambda t: sigmoid(t * 3.0 - 1.0).sum(), (3, 3))

    def test_neg(self):
        check_op(lambda t: (-t).sum(), (5,))


class TestMatmulAndShape:
    def test_matmul_left(self):
        b = np.linspace(-1, 1, 12).reshape(4, 3)
        check_op(lambda t: (t @ b).sum(), (2, 4))

    def test_matmul_right(self):
        a = np.linspace(-1, 1, 8).reshape(2, 4)
        check_op(lambda t: (a @ t).sum(), (4, 3))

    def test_matmul_both_sides(self):
        check_op(lambda t: ((t @ t.T) ** 2.0).sum(), (3, 4))

    def test_reshape_transpose(self):
        check_op(
            lambda t: (t.reshape(2, 3, 2).transpose((0, 2, 1)).reshape(4, 3) ** 2.0).sum(),
            (4, 3),
        )

    def test_sum_axis_keepdims(self):
        check_op(lambda t: (t.sum(axis=0, keepdims=True) ** 2.0).sum(), (3, 4))

    def test_take_rows(self):
        check_op(lambda t: (t.take_rows([0, 2, 2]) ** 2.0).sum(), (4, 3))

    def test_getitem_slice(self):
        check_op(lambda t: (t[1:3] * 2.0).sum(), (4, 3))


class TestAnalyticCases:
    def test_sum_of_squares_gradient(self):
        p = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        (p**2.0).sum().backward()
        np.testing.assert_allclose(p.grad, [2.0, -4.0, 6.0])

    def test_unused_parameter_gets_no_gradient(self):
        used = Tensor(np.ones(3), requires_grad=True)
        unused = Tensor(np.ones(3), requires_grad=True)
        (used * 2.0).sum().backward()
        assert unused.grad is None
        np.testing.assert_allclose(used.grad, 2.0)

    def test_grad_accumulates_over_shared_subexpression(self):
        p = Tensor(np.array([3.0]), requires_grad=True)
        y = p * p  # dy/dp = 2p through two paths
        y.sum().backward()
        np.testing.assert_allclose(p.grad, [6.0])


class TestBackwardContract:
    def test_non_scalar_loss_rejected(self):
        t = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (t * 2.0).backward()

    def test_double_backward_rejected(self):
        t = Tensor(np.ones(3), requires_grad=True)
        loss = (t * 2.0).sum()
        loss.backward()
        with pytest.raises(RuntimeError, match="already called"):
            loss.backward()

    def test_constants_track_nothing(self):
        c = Tensor(np.ones(3))
        out = c * 2.0 + 1.0
        assert not out.requires_grad

    def test_numpy_defers_to_tensor(self):
        t = Tensor(np.ones((2, 2)), requires_grad=True)
        out = np.full((2, 2), 3.0) - t  # ndarray.__sub__ must hand over
        assert isinstance(out, Tensor)
        out.sum().backward()
        np.testing.assert_allclose(t.grad, -1.0)
