"""
Cotangent Laplace-Beltrami discretization, generalized eigensolver and diagonal
spectral descriptors (heat kernel, HKS, WKS and arbitrary transfer functions).
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from app.core.errors import ConvergenceError, DimensionError, InsufficientDataError, MeshValidationError
from app.models.mesh import Mesh, VertexAreas
from app.models.spectral import DescriptorField, Eigensystem, Provenance, StiffnessMatrix

logger = logging.getLogger(__name__)

# Above this vertex count the sparse shift-invert Lanczos solver is used
DENSE_LIMIT = 1500
RESIDUAL_WARN = 1e-8
RESIDUAL_FAIL = 1e-6
SIGN_TOL = 1e-10


def cotangent_matrix(mesh: Mesh) -> StiffnessMatrix:
    """S with s_ij = -(cot alpha_ij + cot beta_ij) / 2 off the diagonal and zero row sums."""
    n = mesh.n_vertices
    corners = mesh.vertices[mesh.faces]
    # edge opposite to each corner
    edges = np.roll(corners, 1, axis=1) - np.roll(corners, 2, axis=1)
    double_area = 2.0 * mesh.face_areas
    if np.any(double_area <= 0) or not np.all(np.isfinite(double_area)):
        fi = int(np.argmax(~(double_area > 0)))
        raise MeshValidationError(f"face {fi} is degenerate, cotangent weights undefined")

    rows, cols, vals = [], [], []
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        # cotangent of the angle at corner i, assigned to the opposite edge (i1, i2)
        cot = -np.sum(edges[:, i1] * edges[:, i2], axis=-1) / double_area
        rows.append(mesh.faces[:, i1])
        cols.append(mesh.faces[:, i2])
        vals.append(-0.5 * cot)
    if not np.all(np.isfinite(np.concatenate(vals))):
        raise MeshValidationError("cotangent weight overflow")

    half = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    off = half + half.T
    diagonal = -np.asarray(off.sum(axis=1)).ravel()
    matrix = (off + sparse.diags(diagonal)).tocsr()
    matrix.sort_indices()
    return StiffnessMatrix(matrix)


def _fix_signs(phi: np.ndarray) -> np.ndarray:
    """Make the first clearly nonzero component of every column positive."""
    out = phi.copy()
    for k in range(phi.shape[1]):
        col = phi[:, k]
        significant = np.flatnonzero(np.abs(col) > SIGN_TOL * np.abs(col).max())
        if len(significant) and col[significant[0]] < 0:
            out[:, k] = -col
    return out


def eigensystem(
    stiffness: StiffnessMatrix,
    areas: VertexAreas,
    k: int,
    dense_limit: int = DENSE_LIMIT,
) -> Eigensystem:
    """K smallest eigenpairs of S phi = lambda A phi through B = A^-1/2 S A^-1/2."""
    n = stiffness.n_vertices
    if areas.n_vertices != n:
        raise DimensionError(f"{areas.n_vertices} areas for a {n}-vertex stiffness matrix")
    if not 1 <= k <= n:
        raise DimensionError(f"requested {k} eigenpairs from a {n}-vertex mesh")
    if np.any(areas.areas <= 0):
        raise ValueError("vertex areas must be positive")

    inv_sqrt = 1.0 / np.sqrt(areas.areas)
    d = sparse.diags(inv_sqrt)
    reduced = (d @ stiffness.matrix @ d).tocsr()
    reduced = 0.5 * (reduced + reduced.T)

    if n <= dense_limit or k >= n - 1:
        logger.debug("Dense eigensolve: n=%d, k=%d", n, k)
        values, vectors = linalg.eigh(reduced.toarray(), subset_by_index=[0, k - 1])
    else:
        logger.debug("Shift-invert Lanczos: n=%d, k=%d", n, k)
        scale = float(np.abs(reduced.diagonal()).max())
        rng = np.random.default_rng(0)
        try:
            values, vectors = eigsh(
                reduced, k=k, sigma=-1e-8 * scale, which="LM", v0=rng.standard_normal(n)
            )
        except ArpackNoConvergence as e:
            raise ConvergenceError(
                f"Lanczos solver converged on {len(e.eigenvalues)} of {k} eigenpairs", residual=math.inf
            )
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]

    values = np.maximum(values, 0.0)
    phi = _fix_signs(inv_sqrt[:, None] * vectors)
    eig = Eigensystem(eigenvalues=values, eigenfunctions=phi, mass=areas)

    residual = eigen_residuals(stiffness, eig).max()
    if residual > RESIDUAL_FAIL:
        raise ConvergenceError("eigenpairs failed the residual check", residual=float(residual))
    if residual > RESIDUAL_WARN:
        logger.warning("Eigenpair relative residual %.3e above %.0e", residual, RESIDUAL_WARN)
    return eig


def eigen_residuals(stiffness: StiffnessMatrix, eig: Eigensystem) -> np.ndarray:
    """Relative residual ||S phi - lambda A phi|| per eigenpair."""
    s_phi = stiffness.matrix @ eig.eigenfunctions
    a_phi = eig.mass.areas[:, None] * eig.eigenfunctions
    res = np.linalg.norm(s_phi - a_phi * eig.eigenvalues[None, :], axis=0)
    ref = np.linalg.norm(s_phi, axis=0)
    zero = ~eig.positive_mask
    ref[zero] = np.linalg.norm(a_phi[:, zero], axis=0)
    return res / np.maximum(ref, np.finfo(np.float64).tiny)


def heat_kernel(eig: Eigensystem, t: float, i: int, j: int) -> float:
    if t < 0:
        raise ValueError("diffusion time must be nonnegative")
    phi = eig.eigenfunctions
    return float(np.sum(np.exp(-t * eig.eigenvalues) * phi[i] * phi[j]))


def heat_diffusion(eig: Eigensystem, u0: np.ndarray, t: float) -> np.ndarray:
    """Truncated spectral solution of the heat equation at time t from initial data u0."""
    if t < 0:
        raise ValueError("diffusion time must be nonnegative")
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape[0] != eig.n_vertices:
        raise DimensionError(f"initial data has {u0.shape[0]} rows, mesh has {eig.n_vertices} vertices")
    coeffs = eig.eigenfunctions.T @ (eig.mass.areas.reshape((-1,) + (1,) * (u0.ndim - 1)) * u0)
    decay = np.exp(-t * eig.eigenvalues).reshape((-1,) + (1,) * (u0.ndim - 1))
    return eig.eigenfunctions @ (decay * coeffs)


def transfer_descriptor(eig: Eigensystem, tau: np.ndarray, provenance: Provenance = Provenance.NET) -> DescriptorField:
    """f_q(x) = sum_k tau[k, q] phi_k(x)^2 for a (K, Q) table of transfer values."""
    tau = np.asarray(tau, dtype=np.float64)
    if tau.ndim != 2 or tau.shape[0] != eig.k:
        raise DimensionError(f"transfer table must have shape ({eig.k}, Q), got {tau.shape}")
    return DescriptorField(eig.squared() @ tau, provenance)


def _check_grid(values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).ravel()
    if len(values) == 0:
        raise ValueError(f"{name} must not be empty")
    if np.any(values <= 0):
        raise ValueError(f"{name} must be positive")
    if np.any(np.diff(values) < 0):
        raise ValueError(f"{name} must be ascending")
    return values


def hks(eig: Eigensystem, times: np.ndarray) -> DescriptorField:
    """Heat kernel signature: low-pass transfer exp(-t lambda)."""
    times = _check_grid(times, "times")
    tau = np.exp(-np.outer(eig.eigenvalues, times))
    return transfer_descriptor(eig, tau, Provenance.HKS)


def wks(eig: Eigensystem, energies: np.ndarray, sigma: float) -> DescriptorField:
    """Wave kernel signature: log-normal band-pass around each energy, zero eigenvalues skipped."""
    energies = _check_grid(energies, "energies")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mask = eig.positive_mask
    tau = np.zeros((eig.k, len(energies)))
    log_lam = np.log(eig.eigenvalues[mask])
    tau[mask] = np.exp(-((np.log(energies)[None, :] - log_lam[:, None]) ** 2) / (2.0 * sigma * sigma))
    return transfer_descriptor(eig, tau, Provenance.WKS)


def _spectral_range(eig: Eigensystem) -> Tuple[float, float]:
    positive = eig.eigenvalues[eig.positive_mask]
    if len(positive) < 2:
        raise InsufficientDataError(
            f"need at least 2 positive eigenvalues, got {len(positive)}",
            hint="increase spectral.k",
        )
    return float(positive[0]), float(positive[-1])


def default_hks_times(eig: Eigensystem, count: int = 16) -> np.ndarray:
    """Log-spaced times over [4 ln 10 / lambda_K, 4 ln 10 / lambda_2]."""
    lam_2, lam_k = _spectral_range(eig)
    t_min, t_max = 4.0 * math.log(10.0) / lam_k, 4.0 * math.log(10.0) / lam_2
    return np.exp(np.linspace(math.log(t_min), math.log(t_max), count))


def default_wks_energies(eig: Eigensystem, count: int = 16, sigma_factor: float = 7.0) -> Tuple[np.ndarray, float]:
    """Energies log-spaced over [lambda_2, lambda_K] and a bandwidth of sigma_factor grid steps."""
    lam_2, lam_k = _spectral_range(eig)
    log_grid = np.linspace(math.log(lam_2), math.log(lam_k), count)
    step = (log_grid[-1] - log_grid[0]) / max(count - 1, 1)
    return np.exp(log_grid), sigma_factor * step


def spectral_descriptor(eig: Eigensystem, kind: Provenance, count: int = 16) -> DescriptorField:
    """HKS or WKS on the default grids."""
    if kind is Provenance.HKS:
        return hks(eig, default_hks_times(eig, count))
    if kind is Provenance.WKS:
        energies, sigma = default_wks_energies(eig, count)
        return wks(eig, energies, sigma)
    raise ValueError(f"no default grid for {kind.value} descriptors")


def compute_spectrum(mesh: Mesh, areas: VertexAreas, k: int, dense_limit: Optional[int] = None) -> Eigensystem:
    """Assemble S for mesh and solve for min(k, N) eigenpairs."""
    stiffness = cotangent_matrix(mesh)
    k = min(k, mesh.n_vertices)
    return eigensystem(stiffness, areas, k, dense_limit if dense_limit is not None else DENSE_LIMIT)
