"""
Network types: layer specs, the flat parameter vector, models and forward caches.
"""
import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.core.errors import DimensionError
from app.models.charting import PatchOperator


class LayerKind(str, Enum):
    LIN = "LIN"
    RELU = "RELU"
    GC = "GC"
    AMP = "AMP"
    FTM = "FTM"
    COV = "COV"
    SOFTMAX = "SOFTMAX"


class Layout(str, Enum):
    """What a tensor between two layers indexes."""

    POINT = "point"  # (N, P)
    ROTATION = "rotation"  # (N, n_theta, P)
    GLOBAL = "global"  # (1, P)


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_dim: int
    out_dim: int
    bias: bool = False
    kept_freqs: Optional[int] = None
    n_rho: int = 0
    n_theta: int = 0

    def parameter_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        if self.kind is LayerKind.LIN:
            shapes = [("weight", (self.out_dim, self.in_dim))]
            if self.bias:
                shapes.append(("bias", (self.out_dim,)))
            return shapes
        if self.kind is LayerKind.GC:
            return [("filters", (self.out_dim, self.in_dim, self.n_rho, self.n_theta))]
        return []

    @property
    def needs_patch_operator(self) -> bool:
        return self.kind in (LayerKind.GC, LayerKind.FTM)


@dataclass(frozen=True)
class Slot:
    layer: int
    name: str
    offset: int
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


class ParameterSet:
    """All learnable tensors of a model stored back to back in one float64 vector."""

    def __init__(self, slots: List[Slot], values: Optional[np.ndarray] = None):
        self.slots = list(slots)
        size = sum(s.size for s in self.slots)
        if values is None:
            values = np.zeros(size)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (size,):
            raise DimensionError(f"parameter vector has shape {values.shape}, layout needs ({size},)")
        self.values = values
        self._index: Dict[Tuple[int, str], Slot] = {(s.layer, s.name): s for s in self.slots}

    @property
    def size(self) -> int:
        return len(self.values)

    def view(self, layer: int, name: str, flat: Optional[np.ndarray] = None) -> np.ndarray:
        """Shaped view into the parameter vector (or into a same-layout gradient vector)."""
        slot = self._index[(layer, name)]
        source = self.values if flat is None else flat
        return source[slot.offset : slot.offset + slot.size].reshape(slot.shape)

    def has(self, layer: int, name: str) -> bool:
        return (layer, name) in self._index

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.slots, self.values.copy())

    def with_values(self, values: np.ndarray) -> "ParameterSet":
        return ParameterSet(self.slots, values)

    def token(self) -> str:
        return hashlib.blake2b(self.values.tobytes(), digest_size=16).hexdigest()


@dataclass
class Model:
    """Ordered layers over a shared parameter vector, optionally bound to one shape's patch operator."""

    architecture: Tuple[str, ...]
    layers: Tuple[LayerSpec, ...]
    params: ParameterSet
    input_dim: int
    n_rho: int
    n_theta: int
    n_reference: Optional[int] = None
    patch_operator: Optional[PatchOperator] = None
    areas: Optional[np.ndarray] = None

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim if self.layers else self.input_dim

    @property
    def parameter_count(self) -> int:
        return self.params.size

    @property
    def has_softmax_head(self) -> bool:
        return bool(self.layers) and self.layers[-1].kind is LayerKind.SOFTMAX

    @property
    def has_cov_head(self) -> bool:
        return any(spec.kind is LayerKind.COV for spec in self.layers)

    def bind(self, patch_operator: Optional[PatchOperator], areas: Optional[np.ndarray] = None) -> "Model":
        """Same parameters, different shape."""
        if patch_operator is not None and patch_operator.bins != (self.n_rho, self.n_theta):
            raise DimensionError(
                f"patch operator bins {patch_operator.bins} differ from model bins {(self.n_rho, self.n_theta)}"
            )
        return replace(self, patch_operator=patch_operator, areas=areas)

    def with_params(self, params: ParameterSet) -> "Model":
        return replace(self, params=params)


@dataclass
class Activation:
    """Forward caches of one model evaluation, tagged with the parameters they came from."""

    token: str
    inputs: List[np.ndarray] = field(default_factory=list)
    caches: List[Dict[str, Any]] = field(default_factory=list)
    output: Optional[np.ndarray] = None
