"""
Siamese and multinomial regression losses with their analytic gradients.
"""
from typing import Tuple

import numpy as np

from app.core.errors import DimensionError

# Probabilities are clipped here before taking logs
PROB_FLOOR = 1e-300


def siamese_loss(
    desc_a: np.ndarray,
    desc_b: np.ndarray,
    is_positive: np.ndarray,
    gamma: float = 0.5,
    margin: float = 1.0,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """(1 - gamma) sum_pos |a - b|^2 + gamma sum_neg (margin - |a - b|)_+^2.

    Returns (loss, grad_a, grad_b).
    """
    a = np.atleast_2d(np.asarray(desc_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(desc_b, dtype=np.float64))
    positive = np.asarray(is_positive, dtype=bool).ravel()
    if a.shape != b.shape or len(positive) != a.shape[0]:
        raise DimensionError(f"descriptor batches {a.shape} / {b.shape} with {len(positive)} labels")

    diff = a - b
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    hinge = np.maximum(margin - dist, 0.0)

    loss = (1.0 - gamma) * np.sum(dist[positive] ** 2) + gamma * np.sum(hinge[~positive] ** 2)

    coeff = np.zeros(len(dist))
    coeff[positive] = 2.0 * (1.0 - gamma)
    negative = ~positive & (hinge > 0.0) & (dist > 0.0)
    # d/dd (m - d)^2 = -2 (m - d); d dist / d a = diff / dist
    coeff[negative] = -2.0 * gamma * hinge[negative] / dist[negative]
    grad_a = coeff[:, None] * diff
    return float(loss), grad_a, -grad_a


def multinomial_loss(probs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """-sum_i log probs[i, targets[i]]; the gradient is taken with respect to the logits."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64).ravel()
    if probs.ndim != 2 or len(targets) != probs.shape[0]:
        raise DimensionError(f"{len(targets)} targets for probabilities of shape {probs.shape}")
    if np.any(targets < 0) or np.any(targets >= probs.shape[1]):
        raise ValueError(f"targets must lie in [0, {probs.shape[1]})")
    rows = np.arange(len(targets))
    loss = -np.sum(np.log(np.maximum(probs[rows, targets], PROB_FLOOR)))
    grad = probs.copy()
    grad[rows, targets] -= 1.0
    return float(loss), grad
