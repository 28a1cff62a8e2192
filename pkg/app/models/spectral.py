"""
Spectral domain types: stiffness matrix, eigensystem, spline basis, descriptor fields.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse

from app.core.errors import DimensionError
from app.models.mesh import VertexAreas

# Eigenvalues at or below this fraction of the largest one are treated as zero
ZERO_EIGENVALUE_TOL = 1e-8


@dataclass(frozen=True)
class StiffnessMatrix:
    """Positive semidefinite cotangent stiffness matrix (the negated cotangent Laplacian)."""

    matrix: sparse.csr_matrix

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        diff = self.matrix - self.matrix.T
        return diff.nnz == 0 or float(abs(diff).max()) <= tol


@dataclass(frozen=True)
class Eigensystem:
    """K smallest generalized eigenpairs S phi = lambda A phi, ascending and A-orthonormal."""

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    mass: VertexAreas

    def __post_init__(self):
        if self.eigenfunctions.ndim != 2 or self.eigenfunctions.shape[1] != len(self.eigenvalues):
            raise DimensionError(
                f"eigenfunctions {self.eigenfunctions.shape} do not match {len(self.eigenvalues)} eigenvalues"
            )
        if self.eigenfunctions.shape[0] != self.mass.n_vertices:
            raise DimensionError("eigenfunction rows do not match the mass vector")

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def n_vertices(self) -> int:
        return self.eigenfunctions.shape[0]

    @property
    def positive_mask(self) -> np.ndarray:
        """Eigenpairs whose eigenvalue is distinguishable from zero."""
        return self.eigenvalues > ZERO_EIGENVALUE_TOL * self.eigenvalues[-1]

    def squared(self) -> np.ndarray:
        return self.eigenfunctions ** 2

    def truncated(self, k: int) -> "Eigensystem":
        if not 1 <= k <= self.k:
            raise DimensionError(f"cannot truncate {self.k} eigenpairs to {k}")
        return Eigensystem(self.eigenvalues[:k], self.eigenfunctions[:, :k], self.mass)


@dataclass(frozen=True)
class SplineBasis:
    """Clamped B-spline basis over [lower, upper], in log-eigenvalue space when log_domain is set."""

    knots: np.ndarray
    degree: int
    count: int
    lower: float
    upper: float
    log_domain: bool = True

    def coordinates(self, eigenvalues: np.ndarray) -> np.ndarray:
        """Map eigenvalues into the knot domain; nonpositive values become -inf in log space."""
        lam = np.asarray(eigenvalues, dtype=np.float64)
        if not self.log_domain:
            return lam
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(lam > 0, np.log(np.where(lam > 0, lam, 1.0)), -np.inf)


class Provenance(str, Enum):
    HKS = "HKS"
    WKS = "WKS"
    GEOVEC = "GEOVEC"
    NET = "NET"


@dataclass(frozen=True)
class DescriptorField:
    """Per-vertex feature vectors; row i belongs to mesh vertex i."""

    values: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DimensionError(f"descriptor field must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.provenance.value} descriptor field has non-finite entries")

    @property
    def n_vertices(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]
