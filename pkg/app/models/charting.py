"""
Geodesic polar chart types: distance fields, local charts and the sparse patch operator.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import sparse

# Charts with fewer non-center entries than this cannot resolve an angular coordinate
MIN_CHART_ENTRIES = 3


@dataclass(frozen=True)
class DistanceField:
    """First-arrival geodesic distances from one source; inf where the march never reached."""

    source: int
    distances: np.ndarray
    reach: float

    @property
    def reached(self) -> np.ndarray:
        return np.flatnonzero(np.isfinite(self.distances))


@dataclass(frozen=True)
class LocalChart:
    """Geodesic polar coordinates (rho, theta) of the vertices inside the disc of radius rho0.

    Entry 0 is always the center with rho = theta = 0; theta lies in [0, 2*pi) and
    spans only [0, pi] for boundary centers (half-disc chart).
    """

    center: int
    vertices: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    disc_radius: float
    on_boundary: bool = False

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def is_degenerate(self) -> bool:
        return self.size - 1 < MIN_CHART_ENTRIES


@dataclass(frozen=True)
class PatchOperator:
    """Sparse map from per-vertex values to binned polar patches.

    Row (x * n_rho + k) * n_theta + j holds the interpolation weights of radial bin k and
    angular bin j of the patch around vertex x; columns are mesh vertices.
    """

    matrix: sparse.csr_matrix
    n_rho: int
    n_theta: int
    disc_radius: float
    sigma_rho: float
    sigma_theta: float
    area_weighted: bool = False
    degenerate: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[1]

    @property
    def bins(self) -> Tuple[int, int]:
        return self.n_rho, self.n_theta

    @property
    def n_bins(self) -> int:
        return self.n_rho * self.n_theta

    def row_index(self, vertex: int, k: int, j: int) -> int:
        return (vertex * self.n_rho + k) * self.n_theta + j

    def row_support(self, row: int) -> np.ndarray:
        start, stop = self.matrix.indptr[row], self.matrix.indptr[row + 1]
        return self.matrix.indices[start:stop]
