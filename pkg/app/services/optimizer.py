"""
Adadelta over a flat parameter vector.
"""
from dataclasses import dataclass

import numpy as np

from app.core.errors import DimensionError

DEFAULT_DECAY = 0.95
DEFAULT_EPSILON = 1e-6


@dataclass
class OptimizerState:
    """Running averages E[g^2] and E[dx^2], one entry per parameter."""

    mean_sq_grad: np.ndarray
    mean_sq_update: np.ndarray
    steps: int = 0

    @classmethod
    def zeros(cls, size: int) -> "OptimizerState":
        return cls(np.zeros(size), np.zeros(size))

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.mean_sq_grad.copy(), self.mean_sq_update.copy(), self.steps)


def adadelta_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: OptimizerState,
    decay: float = DEFAULT_DECAY,
    epsilon: float = DEFAULT_EPSILON,
):
    """One update; returns (new params, new state) and leaves the inputs untouched."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.mean_sq_grad.shape:
        raise DimensionError(
            f"parameter {params.shape}, gradient {grads.shape} and state {state.mean_sq_grad.shape} shapes differ"
        )
    mean_sq_grad = decay * state.mean_sq_grad + (1.0 - decay) * grads * grads
    # new E[g^2], old E[dx^2]
    update = -np.sqrt(state.mean_sq_update + epsilon) / np.sqrt(mean_sq_grad + epsilon) * grads
    mean_sq_update = decay * state.mean_sq_update + (1.0 - decay) * update * update
    return params + update, OptimizerState(mean_sq_grad, mean_sq_update, state.steps + 1)
