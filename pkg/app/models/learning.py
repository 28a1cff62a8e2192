"""
Training-side types: per-shape inputs, sampled pairs, loss history.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from app.models.charting import PatchOperator
from app.models.mesh import Mesh
from app.models.network import Model


@dataclass
class ShapeSample:
    """Everything the training loop needs about one shape."""

    name: str
    mesh: Mesh
    features: np.ndarray
    patch_operator: Optional[PatchOperator]
    areas: np.ndarray
    rho0: float
    ground_truth: Optional[np.ndarray] = None  # vertex -> reference vertex
    label: Optional[str] = None

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices


@dataclass(frozen=True)
class PairSet:
    """Rows (shape_a, vertex_a, shape_b, vertex_b); vertex columns are -1 for whole-shape pairs."""

    positives: np.ndarray
    negatives: np.ndarray

    @property
    def size(self) -> int:
        return len(self.positives) + len(self.negatives)

    def stacked(self):
        """All pairs as one (P, 4) array and the matching is_positive flags."""
        pairs = np.concatenate((self.positives, self.negatives)).reshape(-1, 4)
        flags = np.concatenate((np.ones(len(self.positives), bool), np.zeros(len(self.negatives), bool)))
        return pairs, flags


@dataclass(frozen=True)
class LossRecord:
    step: int
    loss: float
    val_loss: Optional[float] = None


@dataclass
class TrainResult:
    model: Model
    history: List[LossRecord] = field(default_factory=list)
    best_step: Optional[int] = None
    best_val_loss: Optional[float] = None

    @property
    def updates(self) -> int:
        return len(self.history)
