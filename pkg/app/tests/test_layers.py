from dataclasses import replace

import numpy as np
import pytest

from app.core.errors import DimensionError
from app.services import layers as L
from app.tests.gradcheck import max_relative_error

TOL = 1e-4


@pytest.fixture
def x(small_operator, rng):
    return rng.standard_normal((small_operator.n_vertices, 3))


@pytest.fixture
def filters(small_operator, rng):
    return rng.standard_normal((4, 3, small_operator.n_rho, small_operator.n_theta))


def test_lin_gradients(rng):
    x = rng.standard_normal((7, 5))
    weight = rng.standard_normal((4, 5))
    bias = rng.standard_normal(4)
    g = rng.standard_normal((7, 4))
    out = L.lin_forward(x, weight, bias)
    grad_x, grad_w, grad_b = L.lin_backward(x, weight, out, g)
    assert max_relative_error(lambda w: np.sum(L.lin_forward(x, w, bias) * g), grad_w, weight) < TOL
    assert max_relative_error(lambda v: np.sum(L.lin_forward(v, weight, bias) * g), grad_x, x) < TOL
    assert max_relative_error(lambda b: np.sum(L.lin_forward(x, weight, b) * g), grad_b, bias) < TOL


def test_lin_with_fused_relu(rng):
    x = rng.standard_normal((7, 5))
    weight = rng.standard_normal((4, 5))
    g = rng.standard_normal((7, 4))
    out = L.lin_forward(x, weight, with_relu=True)
    assert np.array_equal(out, np.maximum(x @ weight.T, 0.0))
    grad_x, grad_w, _ = L.lin_backward(x, weight, out, g, with_relu=True)
    f = lambda w: np.sum(L.lin_forward(x, w, with_relu=True) * g)  # noqa: E731
    assert max_relative_error(f, grad_w, weight) < TOL


def test_lin_rejects_wrong_width(rng):
    with pytest.raises(DimensionError):
        L.lin_forward(rng.standard_normal((3, 4)), rng.standard_normal((2, 5)))


def test_relu_gradient(rng):
    x = rng.standard_normal((6, 5))
    x[np.abs(x) < 0.01] = 0.5
    g = rng.standard_normal((6, 5))
    grad = L.relu_backward(L.relu_forward(x), g)
    assert max_relative_error(lambda v: np.sum(L.relu_forward(v) * g), grad, x) < TOL


def test_gc_gradients(small_operator, x, filters, rng):
    out, patches = L.gc_forward(x, filters, small_operator)
    assert out.shape == (small_operator.n_vertices, small_operator.n_theta, 4)
    g = rng.standard_normal(out.shape)
    grad_x, grad_filters = L.gc_backward(filters, patches, g, small_operator)

    def by_filters(f):
        return np.sum(L.gc_forward(x, f, small_operator)[0] * g)

    def by_input(v):
        return np.sum(L.gc_forward(v, filters, small_operator)[0] * g)

    assert max_relative_error(by_filters, grad_filters, filters) < TOL
    assert max_relative_error(by_input, grad_x, x) < TOL


def test_gc_rotation_zero_is_plain_correlation(small_operator, x, filters):
    out, patches = L.gc_forward(x, filters, small_operator)
    expected = np.einsum("nkjp,qpkj->nq", patches, filters)
    assert np.allclose(out[:, 0, :], expected, atol=1e-12)


def test_gc_needs_matching_bins(small_operator, x, rng):
    with pytest.raises(DimensionError):
        L.gc_forward(x, rng.standard_normal((2, 3, 4, 6)), small_operator)
    with pytest.raises(DimensionError):
        L.gc_forward(x, rng.standard_normal((2, 3, 3, 6)), None)


def test_amp_gradient(rng):
    x = rng.standard_normal((5, 6, 3))
    g = rng.standard_normal((5, 3))
    out, index = L.amp_forward(x)
    assert np.array_equal(out, x.max(axis=1))
    grad = L.amp_backward(index, 6, g)
    assert max_relative_error(lambda v: np.sum(L.amp_forward(v)[0] * g), grad, x) < TOL


def test_amp_ties_pick_lowest_rotation():
    x = np.zeros((1, 4, 1))
    x[0, 1, 0] = x[0, 3, 0] = 2.0
    _, index = L.amp_forward(x)
    assert index[0, 0] == 1


def test_amp_of_gc_ignores_filter_rotation(small_operator, x, filters):
    reference, _ = L.amp_forward(L.gc_forward(x, filters, small_operator)[0])
    for shift in range(1, small_operator.n_theta):
        rolled = np.roll(filters, shift, axis=-1)
        out, _ = L.amp_forward(L.gc_forward(x, rolled, small_operator)[0])
        assert np.array_equal(out, reference)


def test_ftm_gradient(small_operator, x, rng):
    magnitudes, spectrum = L.ftm_forward(x, small_operator)
    assert magnitudes.shape == (small_operator.n_vertices, 3, 4, 3)
    g = rng.standard_normal(magnitudes.shape)
    grad = L.ftm_backward(spectrum, g, small_operator)
    f = lambda v: np.sum(L.ftm_forward(v, small_operator)[0] * g)  # noqa: E731
    assert max_relative_error(f, grad, x) < 1e-3


def test_ftm_ignores_angular_origin(small_operator, x):
    n, n_rho, n_theta = small_operator.n_vertices, small_operator.n_rho, small_operator.n_theta
    rows = np.arange(n * n_rho * n_theta).reshape(n, n_rho, n_theta)
    reference, _ = L.ftm_forward(x, small_operator)
    for shift in (1, 2, 5):
        permuted = replace(small_operator, matrix=small_operator.matrix[np.roll(rows, shift, axis=2).ravel()])
        out, _ = L.ftm_forward(x, permuted)
        assert np.abs(out - reference).max() < 1e-10


def test_ftm_kept_frequencies(small_operator, x):
    out, _ = L.ftm_forward(x, small_operator, kept_freqs=2)
    assert out.shape[2] == 2
    with pytest.raises(DimensionError):
        L.ftm_forward(x, small_operator, kept_freqs=5)


def test_dft_matrix_matches_fft(rng):
    signal = rng.standard_normal(8)
    assert np.allclose(L.dft_matrix(8, 5) @ signal, np.fft.rfft(signal), atol=1e-12)


def test_cov_matches_weighted_covariance(rng):
    x = rng.standard_normal((20, 3))
    areas = rng.uniform(0.5, 1.5, 20)
    vec, _ = L.cov_forward(x, areas)
    expected = np.cov(x, rowvar=False, aweights=areas, bias=True)
    assert np.allclose(vec.reshape(3, 3, order="F"), expected, atol=1e-12)



def test_cov_ignores_vertex_order(rng):
    x = rng.standard_normal((15, 4))
    areas = rng.uniform(0.5, 1.5, 15)
    perm = rng.permutation(15)
    assert np.allclose(L.cov_forward(x[perm], areas[perm])[0], L.cov_forward(x, areas)[0], rtol=0, atol=1e-12)

def test_cov_gradient(rng):
    x = rng.standard_normal((12, 3))
    areas = rng.uniform(0.5, 1.5, 12)
    g = rng.standard_normal(9)
    _, centered = L.cov_forward(x, areas)
    grad = L.cov_backward(centered, areas, g)
    assert max_relative_error(lambda v: float(L.cov_forward(v, areas)[0] @ g), grad, x) < TOL


def test_cov_rejects_wrong_areas(rng):
    with pytest.raises(DimensionError):
        L.cov_forward(rng.standard_normal((5, 2)), np.ones(4))


def test_softmax_gradient(rng):
    x = rng.standard_normal((4, 6))
    g = rng.standard_normal((4, 6))
    probs = L.softmax_forward(x)
    assert np.allclose(probs.sum(axis=1), 1.0)
    grad = L.softmax_backward(probs, g)
    assert max_relative_error(lambda v: np.sum(L.softmax_forward(v) * g), grad, x) < TOL


def test_softmax_is_shift_stable():
    probs = L.softmax_forward(np.array([[1000.0, 1000.0, 999.0]]))
    assert np.all(np.isfinite(probs))
    assert probs[0, 0] == pytest.approx(probs[0, 1])
