import math

import numpy as np
import pytest

from app.core.errors import DimensionError
from app.services.layers import softmax_forward
from app.services.losses import PROB_FLOOR, multinomial_loss, siamese_loss
from app.tests.gradcheck import max_relative_error


def test_siamese_negative_inside_margin():
    loss, grad_a, grad_b = siamese_loss([[0.0, 0.0]], [[0.5, 0.0]], [False])
    assert loss == pytest.approx(0.125)
    # pushes a away from b
    assert grad_a[0, 0] > 0 and np.allclose(grad_b, -grad_a)


def test_siamese_positive():
    loss, grad_a, _ = siamese_loss([[0.0, 0.0]], [[0.5, 0.0]], [True])
    assert loss == pytest.approx(0.125)
    assert np.allclose(grad_a, [[-0.5, 0.0]])


def test_siamese_negative_beyond_margin_is_free():
    loss, grad_a, _ = siamese_loss([[0.0, 0.0]], [[1.5, 0.0]], [False])
    assert loss == 0.0
    assert np.all(grad_a == 0.0)


def test_siamese_coincident_negative_has_zero_gradient():
    loss, grad_a, _ = siamese_loss([[1.0, 1.0]], [[1.0, 1.0]], [False], gamma=0.5, margin=2.0)
    assert loss == pytest.approx(2.0)
    assert np.all(np.isfinite(grad_a))


def test_siamese_gradient(rng):
    a = rng.standard_normal((10, 3)) * 0.4
    b = rng.standard_normal((10, 3)) * 0.4
    flags = np.arange(10) % 2 == 0
    _, grad_a, grad_b = siamese_loss(a, b, flags, gamma=0.3, margin=1.2)
    assert max_relative_error(lambda v: siamese_loss(v, b, flags, 0.3, 1.2)[0], grad_a, a) < 1e-5
    assert max_relative_error(lambda v: siamese_loss(a, v, flags, 0.3, 1.2)[0], grad_b, b) < 1e-5


def test_siamese_shape_checks():
    with pytest.raises(DimensionError):
        siamese_loss(np.zeros((2, 3)), np.zeros((2, 4)), [True, False])
    with pytest.raises(DimensionError):
        siamese_loss(np.zeros((2, 3)), np.zeros((2, 3)), [True])


def test_multinomial_value():
    probs = np.array([[0.7, 0.2, 0.1], [0.25, 0.25, 0.5]])
    loss, _ = multinomial_loss(probs, [0, 2])
    assert loss == pytest.approx(-math.log(0.7) - math.log(0.5))


def test_multinomial_floor_keeps_loss_finite():
    loss, _ = multinomial_loss(np.array([[1.0, 0.0]]), [1])
    assert loss == pytest.approx(-math.log(PROB_FLOOR))


def test_multinomial_logit_gradient(rng):
    logits = rng.standard_normal((5, 4))
    targets = np.array([0, 3, 1, 1, 2])
    _, grad = multinomial_loss(softmax_forward(logits), targets)
    f = lambda z: multinomial_loss(softmax_forward(z), targets)[0]  # noqa: E731
    assert max_relative_error(f, grad, logits) < 1e-5


def test_multinomial_target_range():
    with pytest.raises(ValueError):
        multinomial_loss(np.full((1, 3), 1 / 3), [3])
    with pytest.raises(DimensionError):
        multinomial_loss(np.full((2, 3), 1 / 3), [0])
