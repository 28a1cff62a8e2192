"""
Forward and backward passes of the individual layers.

Every *_forward returns its output together with whatever the matching *_backward needs.
"""
from typing import Optional, Tuple

import numpy as np

from app.core.errors import DimensionError
from app.models.charting import PatchOperator
from app.services.charting import apply_patch_operator, transpose_apply

# Lower bound on |z| in the FTM gradient
MAGNITUDE_GUARD = 1e-12


def lin_forward(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray] = None, with_relu: bool = False) -> np.ndarray:
    """xi(x W^T + b) over the last axis."""
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"LIN expects {weight.shape[1]} input channels, got {x.shape[-1]}")
    out = x @ weight.T
    if bias is not None:
        out = out + bias
    if with_relu:
        out = np.maximum(out, 0.0)
    return out


def lin_backward(
    x: np.ndarray, weight: np.ndarray, out: np.ndarray, grad_out: np.ndarray, with_relu: bool = False
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (grad_x, grad_weight, grad_bias)."""
    if with_relu:
        grad_out = relu_backward(out, grad_out)
    flat_x = x.reshape(-1, x.shape[-1])
    flat_g = grad_out.reshape(-1, grad_out.shape[-1])
    grad_weight = flat_g.T @ flat_x
    grad_bias = flat_g.sum(axis=0)
    grad_x = grad_out @ weight
    return grad_x, grad_weight, grad_bias


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # subgradient 0 at 0
    return np.where(out > 0.0, grad_out, 0.0)


def _flat_filters(filters: np.ndarray, rotation: int) -> np.ndarray:
    """Filters shifted by rotation angular bins, flattened to (Q, n_rho * n_theta * P)."""
    rolled = np.roll(filters, -rotation, axis=-1)
    return rolled.transpose(0, 2, 3, 1).reshape(filters.shape[0], -1)


def gc_forward(x: np.ndarray, filters: np.ndarray, op: Optional[PatchOperator]) -> Tuple[np.ndarray, np.ndarray]:
    """Geodesic convolution for every whole-bin filter rotation.

    Returns (out, patches) with out of shape (N, n_theta, Q); out[:, r] correlates each patch
    with the filters advanced by r angular bins.
    """
    if op is None:
        raise DimensionError("GC layer needs a bound patch operator")
    q, p, n_rho, n_theta = filters.shape
    if (n_rho, n_theta) != op.bins:
        raise DimensionError(f"filter bins {(n_rho, n_theta)} differ from patch bins {op.bins}")
    if x.ndim != 2 or x.shape[1] != p:
        raise DimensionError(f"GC expects an (N, {p}) input, got {x.shape}")
    patches = apply_patch_operator(op, x)
    flat = patches.reshape(x.shape[0], -1)
    out = np.empty((x.shape[0], n_theta, q))
    for r in range(n_theta):
        out[:, r, :] = flat @ _flat_filters(filters, r).T
    return out, patches


def gc_backward(
    filters: np.ndarray, patches: np.ndarray, grad_out: np.ndarray, op: PatchOperator
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (grad_x, grad_filters)."""
    q, p, n_rho, n_theta = filters.shape
    n = patches.shape[0]
    flat = patches.reshape(n, -1)
    grad_filters = np.zeros_like(filters)
    grad_flat = np.zeros_like(flat)
    for r in range(n_theta):
        g = grad_out[:, r, :]
        shifted = (g.T @ flat).reshape(q, n_rho, n_theta, p).transpose(0, 3, 1, 2)
        grad_filters += np.roll(shifted, r, axis=-1)
        grad_flat += g @ _flat_filters(filters, r)
    grad_x = transpose_apply(op, grad_flat.reshape(patches.shape))
    return grad_x, grad_filters


def amp_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Max over the rotation axis; argmax keeps the lowest rotation on ties."""
    if x.ndim != 3:
        raise DimensionError(f"AMP expects an (N, rotations, P) input, got {x.shape}")
    index = np.argmax(x, axis=1)
    out = np.take_along_axis(x, index[:, None, :], axis=1)[:, 0, :]
    return out, index


def amp_backward(index: np.ndarray, n_rotations: int, grad_out: np.ndarray) -> np.ndarray:
    n, p = grad_out.shape
    grad_x = np.zeros((n, n_rotations, p))
    np.put_along_axis(grad_x, index[:, None, :], grad_out[:, None, :], axis=1)
    return grad_x


def max_frequencies(n_theta: int) -> int:
    return n_theta // 2 + 1


def ftm_forward(x: np.ndarray, op: Optional[PatchOperator], kept_freqs: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Magnitudes of the angular DFT of each patch: (N, n_rho, kept_freqs, P).

    Returns (magnitudes, spectrum) where spectrum holds the complex coefficients.
    """
    if op is None:
        raise DimensionError("FTM layer needs a bound patch operator")
    limit = max_frequencies(op.n_theta)
    kept = limit if kept_freqs is None else kept_freqs
    if not 1 <= kept <= limit:
        raise DimensionError(f"kept_freqs must lie in [1, {limit}], got {kept}")
    patches = apply_patch_operator(op, x)
    spectrum = np.fft.rfft(patches, axis=2)[:, :, :kept, :]
    return np.abs(spectrum), spectrum


def dft_matrix(n_theta: int, kept: int) -> np.ndarray:
    """F[w, j] = exp(-2 pi i w j / n_theta)."""
    w = np.arange(kept)[:, None]
    j = np.arange(n_theta)[None, :]
    return np.exp(-2j * np.pi * w * j / n_theta)


def ftm_backward(spectrum: np.ndarray, grad_out: np.ndarray, op: PatchOperator) -> np.ndarray:
    kept = spectrum.shape[2]
    weighted = grad_out * np.conj(spectrum) / np.maximum(np.abs(spectrum), MAGNITUDE_GUARD)
    grad_patches = np.real(np.einsum("nkwp,wj->nkjp", weighted, dft_matrix(op.n_theta, kept)))
    return transpose_apply(op, grad_patches)


def cov_forward(x: np.ndarray, areas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Area-weighted covariance of the rows of x, column-stacked into a P^2 vector.

    Returns (vector, centered rows).
    """
    areas = np.asarray(areas, dtype=np.float64)
    if x.ndim != 2 or areas.shape != (x.shape[0],):
        raise DimensionError(f"COV expects (N, P) values and N areas, got {x.shape} and {areas.shape}")
    weights = areas / areas.sum()
    centered = x - weights @ x
    cov = (weights[:, None] * centered).T @ centered
    return cov.reshape(-1, order="F"), centered


def cov_backward(centered: np.ndarray, areas: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    p = centered.shape[1]
    g = np.asarray(grad_out).reshape(p, p, order="F")
    weights = np.asarray(areas, dtype=np.float64) / np.sum(areas)
    return weights[:, None] * (centered @ (g + g.T).T)


def softmax_forward(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    inner = np.sum(grad_out * probs, axis=-1, keepdims=True)
    return probs * (grad_out - inner)
