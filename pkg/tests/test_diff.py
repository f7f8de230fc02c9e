import numpy as np
import pytest

import quadtex
from quadtex import diff


def leaf(value):
    with diff.precision('float64'):
        return diff.Tensor(value, requires_grad=True)


def test_tanh_gradient():
    x = leaf([-1.0, 0.0, 2.0])
    diff.backward(diff.tsum(diff.tanh(x)))
    assert np.allclose(x.grad, 1.0 - np.tanh(x.data) ** 2)


def test_sum_and_mean_gradients():
    x = leaf(np.arange(6.0).reshape(2, 3))
    diff.backward(diff.tsum(x, axis=1).sum() + diff.mean(x))
    assert np.allclose(x.grad, 1.0 + 1.0 / 6.0)


def test_broadcast_gradient():
    x, b = leaf(np.ones((4, 3))), leaf(np.zeros(3))
    diff.backward(diff.tsum((x + b) * 2.0))
    assert b.grad.shape == (3,)
    assert np.allclose(b.grad, 8.0)


def test_shared_node_accumulates():
    x = leaf(3.0)
    y = x * x
    diff.backward(y + y)
    assert x.grad == pytest.approx(12.0)


def test_gram_closed_form(rng):
    f = rng.standard_normal((3, 5))
    x = leaf(f)
    g = diff.gram(x, 5.0)
    assert np.allclose(g.data, f @ f.T / 5.0)
    diff.backward(diff.tsum(g))
    # d/dF sum(F F^T) / n = (1 1^T + 1 1^T) F / n
    assert np.allclose(x.grad, 2.0 * np.ones((3, 3)) @ f / 5.0)


def test_conv2d_identity_kernel(rng):
    image = rng.standard_normal((1, 2, 5, 5))
    kernel = np.zeros((2, 2, 3, 3))
    kernel[0, 0, 1, 1] = kernel[1, 1, 1, 1] = 1.0
    with diff.precision('float64'):
        out = diff.conv2d(image, kernel)
    assert np.allclose(out.data, image)


def test_backward_needs_scalar():
    x = leaf(np.ones(3))
    with pytest.raises(quadtex.BackwardError):
        diff.backward(x * 2.0)


def test_backward_releases_graph():
    x = leaf(2.0)
    y = x * x
    z = y + 1.0
    diff.backward(z)
    assert z._parents == () and y._parents == ()
    assert x.grad == pytest.approx(4.0)


def test_grad_leaves_grad_untouched():
    x = leaf([1.0, 2.0])
    y = diff.tsum(x * x)
    first, = diff.grad(y, [x])
    assert np.allclose(first, [2.0, 4.0])
    assert x.grad is None
    # graph is retained by default
    diff.backward(y)
    assert np.allclose(x.grad, [2.0, 4.0])


def test_no_grad_records_nothing():
    x = leaf(1.0)
    with diff.no_grad():
        y = x * 3.0
    assert not y.requires_grad
    assert y.is_leaf


def test_shape_mismatch():
    with pytest.raises(quadtex.ShapeMismatch):
        diff.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(quadtex.ShapeMismatch):
        diff.add(np.ones(3), np.ones(4))


def test_precision_context():
    assert diff.Tensor(1.0).dtype == np.float32
    with diff.precision('float64'):
        assert diff.Tensor(1.0).dtype == np.float64
    assert diff.default_dtype() is np.float32


def test_adam_first_step():
    x = leaf([1.0, -1.0])
    optimizer = diff.Adam([x], lr=0.1)
    x.grad = np.array([1.0, -1.0])
    optimizer.step()
    # bias correction makes the first step lr * sign(g)
    assert np.allclose(x.data, [0.9, -0.9], atol=1e-6)


def test_adam_skips_missing_grad():
    x = leaf([1.0, 2.0])
    optimizer = diff.Adam([x], lr=0.1)
    optimizer.step()
    assert np.allclose(x.data, [1.0, 2.0])
    x.grad = np.zeros(2)
    optimizer.step()
    assert np.allclose(x.data, [1.0, 2.0])


def test_gradcheck_catches_wrong_gradient():
    def bad(x):
        return diff.Tensor._result(x.data ** 2, (x,), lambda g: (g * x.data,), 'bad').sum()

    assert not quadtex.gradcheck(bad, [np.array([1.0, 2.0])]).ok
    assert quadtex.gradcheck(lambda x: diff.tsum(x ** 2), [np.array([1.0, 2.0])]).ok


def test_gradcheck_primitives(rng):
    def fn(x, y):
        z = diff.concat([x, y], axis=0)
        z = diff.stack([z, z * 0.5], axis=1)
        return diff.tsum(diff.softplus(diff.reshape(z, (-1,))) * diff.sigmoid(diff.transpose(z).sum()))

    report = quadtex.gradcheck(fn, [rng.standard_normal((2, 3)), rng.standard_normal((1, 3))])
    assert report.ok, report
