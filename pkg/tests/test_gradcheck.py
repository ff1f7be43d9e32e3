"""Finite-difference verification of every backward pass, 10 seeds each."""

import numpy as np
import pytest

from spiralmlp import ops
from spiralmlp.gradcheck import grad_check, grad_check_fn, numeric_grad
from spiralmlp.layers import Conv2d, GeLU, LayerNorm, Linear

SEEDS = range(10)


@pytest.mark.parametrize("seed", SEEDS)
def test_linear_grad(seed):
    rng = np.random.default_rng(seed)
    layer = Linear(int(rng.integers(2, 6)), int(rng.integers(1, 5)), rng, np.float64)
    x = rng.standard_normal((int(rng.integers(1, 4)), 3, layer.weight.shape[0]))
    report = grad_check(layer, x, tolerance=1e-6, rng=rng)
    assert report.passed, report


@pytest.mark.parametrize("seed", SEEDS)
def test_layernorm_grad(seed):
    rng = np.random.default_rng(seed)
    c = int(rng.integers(2, 8))
    layer = LayerNorm(c, eps=1e-5, dtype=np.float64)
    layer.gamma.value[:] = rng.standard_normal(c)
    layer.beta.value[:] = rng.standard_normal(c)
    report = grad_check(layer, rng.standard_normal((4, 3, c)), tolerance=1e-5, rng=rng)
    assert report.passed, report


@pytest.mark.parametrize("seed", SEEDS)
def test_gelu_grad(seed):
    rng = np.random.default_rng(seed)
    report = grad_check_fn(ops.gelu, ops.gelu_backward,
                           3.0 * rng.standard_normal((4, 5)), tolerance=1e-7, rng=rng)
    assert report.passed, report


@pytest.mark.parametrize("seed", SEEDS)
def test_softmax_grad(seed):
    rng = np.random.default_rng(seed)
    report = grad_check_fn(
        lambda x: ops.softmax(x, axis=-1),
        lambda x, g: ops.softmax_backward(ops.softmax(x, axis=-1), g, axis=-1),
        2.0 * rng.standard_normal((3, 6)), tolerance=1e-6, rng=rng)
    assert report.passed, report


@pytest.mark.parametrize("seed", SEEDS)
def test_conv2d_grad(seed):
    rng = np.random.default_rng(seed)
    stride = int(rng.integers(1, 3))
    layer = Conv2d(3, 3, 2, 3, stride=stride, padding=1, rng=rng, dtype=np.float64)
    report = grad_check(layer, rng.standard_normal((6, 5, 2)), tolerance=1e-6, rng=rng)
    assert report.passed, report


@pytest.mark.parametrize("seed", SEEDS)
def test_gelu_module_grad(seed):
    rng = np.random.default_rng(seed)
    report = grad_check(GeLU(), rng.standard_normal((3, 4)), tolerance=1e-7, rng=rng)
    assert report.passed, report


@pytest.mark.parametrize("seed", range(5))
def test_cross_entropy_grad_vs_numeric(seed):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((4, 5)) * 2
    labels = rng.integers(0, 5, size=4)
    _, grad = ops.cross_entropy(logits, labels)
    num, _ = numeric_grad(lambda: ops.cross_entropy(logits, labels)[0], logits)
    assert np.max(np.abs(grad - num) / np.maximum(1.0, np.abs(num))) < 1e-6


def test_gradcheck_flags_nonfinite():
    class Broken:
        def forward(self, x):
            return x * np.inf

        def backward(self, g):
            return g

        def params(self):
            return []

        def zero_grad(self):
            pass

    report = grad_check(Broken(), np.ones((2, 2)), tolerance=1e-6)
    assert not report.passed
    assert "non-finite" in report.failure


def test_gradcheck_detects_wrong_gradient():
    class OffByTwo:
        def forward(self, x):
            return x * 2.0

        def backward(self, g):
            return g * 4.0  # wrong: should be 2 g

        def params(self):
            return []

        def zero_grad(self):
            pass

    report = grad_check(OffByTwo(), np.ones((2, 2)), tolerance=1e-6)
    assert not report.passed
    assert report.max_rel_err > 0.4
