"""
Local geodesic polar charts and the patch operator built from them.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from app.core.errors import DimensionError
from app.models.charting import LocalChart, PatchOperator
from app.models.mesh import Mesh
from app.services.fast_marching import march

logger = logging.getLogger(__name__)

# Weights below this fraction of their bin's largest weight are dropped
WEIGHT_CUTOFF = 1e-6


def local_chart(mesh: Mesh, center: int, rho0: float) -> LocalChart:
    """Chart of the geodesic disc of radius rho0 around center."""
    result = march(mesh, center, rho0, track_angles=True)
    inside = [v for v in result.order if result.distances[v] <= rho0]
    vertices = np.array(inside, dtype=np.int64)
    rho = result.distances[vertices]
    theta = result.theta[vertices]
    theta[0] = 0.0
    chart = LocalChart(
        center=int(center),
        vertices=vertices,
        rho=rho,
        theta=theta,
        disc_radius=float(rho0),
        on_boundary=bool(mesh.boundary_vertices[center]),
    )
    logger.debug("Chart %d: %d entries", center, chart.size)
    return chart


def compute_charts(mesh: Mesh, rho0: float, threads: int = 1) -> List[LocalChart]:
    """All vertex charts, returned in vertex order regardless of the worker count."""
    centers = range(mesh.n_vertices)
    if threads <= 1:
        charts = [local_chart(mesh, c, rho0) for c in centers]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            charts = list(pool.map(lambda c: local_chart(mesh, c, rho0), centers))
    degenerate = sum(1 for c in charts if c.is_degenerate)
    if degenerate:
        logger.warning("%d of %d charts are degenerate at rho0=%.6g", degenerate, len(charts), rho0)
    return charts


def chart_is_connected(mesh: Mesh, chart: LocalChart) -> bool:
    """True when the chart vertices induce a single connected piece of the edge graph."""
    members = np.zeros(mesh.n_vertices, dtype=bool)
    members[chart.vertices] = True
    keep = members[mesh.edges[:, 0]] & members[mesh.edges[:, 1]]
    local = np.full(mesh.n_vertices, -1, dtype=np.int64)
    local[chart.vertices] = np.arange(chart.size)
    e = local[mesh.edges[keep]]
    graph = sparse.coo_matrix(
        (np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(chart.size, chart.size)
    )
    n_components, _ = connected_components(graph, directed=False)
    return n_components == 1


def _chart_weights(
    chart: LocalChart,
    rho_centers: np.ndarray,
    theta_centers: np.ndarray,
    sigma_rho: float,
    sigma_theta: float,
    entry_areas: Optional[np.ndarray],
) -> np.ndarray:
    """Normalized (entries, n_rho, n_theta) interpolation weights of one chart."""
    w_rho = np.exp(-(((chart.rho[:, None] - rho_centers[None, :]) / sigma_rho) ** 2))
    d_theta = np.mod(chart.theta[:, None] - theta_centers[None, :] + np.pi, 2.0 * np.pi) - np.pi
    w_theta = np.exp(-((d_theta / sigma_theta) ** 2))
    w = w_rho[:, :, None] * w_theta[:, None, :]
    if entry_areas is not None:
        w = w * entry_areas[:, None, None]

    w = _normalize_bins(w)
    w[w < WEIGHT_CUTOFF * w.max(axis=0)[None]] = 0.0
    return _normalize_bins(w)


def _normalize_bins(w: np.ndarray) -> np.ndarray:
    total = w.sum(axis=0)
    nonempty = total > 0
    return np.where(nonempty[None], w / np.where(nonempty, total, 1.0)[None], 0.0)


def patch_operator(
    mesh: Mesh,
    charts: Sequence[LocalChart],
    n_rho: int = 5,
    n_theta: int = 16,
    sigma_rho: Optional[float] = None,
    sigma_theta: Optional[float] = None,
    areas: Optional[np.ndarray] = None,
) -> PatchOperator:
    """Assemble the (N * n_rho * n_theta) x N Gaussian interpolation matrix.

    Passing vertex areas weights each chart entry by its area element before normalization.
    """
    n = mesh.n_vertices
    if len(charts) != n:
        raise DimensionError(f"expected {n} charts, got {len(charts)}")
    if n_rho < 2 or n_theta < 2:
        raise ValueError("n_rho and n_theta must be at least 2")
    rho0 = charts[0].disc_radius
    if any(c.disc_radius != rho0 for c in charts):
        raise ValueError("charts were computed with different disc radii")
    sigma_rho = sigma_rho if sigma_rho is not None else rho0 / n_rho
    sigma_theta = sigma_theta if sigma_theta is not None else 2.0 * np.pi / n_theta
    if sigma_rho <= 0 or sigma_theta <= 0:
        raise ValueError("Gaussian widths must be positive")

    rho_centers = (np.arange(n_rho) + 0.5) * rho0 / n_rho
    theta_centers = 2.0 * np.pi * np.arange(n_theta) / n_theta
    bin_offsets = np.arange(n_rho * n_theta).reshape(n_rho, n_theta)

    rows, cols, vals = [], [], []
    degenerate = []
    for x, chart in enumerate(charts):
        if chart.center != x:
            raise ValueError(f"chart {x} is centered at vertex {chart.center}")
        if chart.is_degenerate:
            degenerate.append(x)
            continue
        entry_areas = np.asarray(areas)[chart.vertices] if areas is not None else None
        w = _chart_weights(chart, rho_centers, theta_centers, sigma_rho, sigma_theta, entry_areas)
        entry, k, j = np.nonzero(w)
        rows.append(x * n_rho * n_theta + bin_offsets[k, j])
        cols.append(chart.vertices[entry])
        vals.append(w[entry, k, j])

    if degenerate:
        logger.warning("Patch rows left empty for %d degenerate charts: %s", len(degenerate), degenerate[:10])

    shape = (n * n_rho * n_theta, n)
    if rows:
        matrix = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
        )
    else:
        matrix = sparse.csr_matrix(shape)
    matrix.sort_indices()
    logger.debug("Patch operator %s with %d nonzeros", shape, matrix.nnz)
    return PatchOperator(
        matrix=matrix,
        n_rho=n_rho,
        n_theta=n_theta,
        disc_radius=float(rho0),
        sigma_rho=float(sigma_rho),
        sigma_theta=float(sigma_theta),
        area_weighted=areas is not None,
        degenerate=tuple(degenerate),
    )


def apply_patch_operator(op: PatchOperator, values: np.ndarray) -> np.ndarray:
    """(N, P) per-vertex values -> (N, n_rho, n_theta, P) patches."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != op.n_vertices:
        raise DimensionError(f"expected a ({op.n_vertices}, P) field, got {values.shape}")
    out = op.matrix @ values
    return out.reshape(op.n_vertices, op.n_rho, op.n_theta, values.shape[1])


def transpose_apply(op: PatchOperator, patches: np.ndarray) -> np.ndarray:
    """Adjoint of apply_patch_operator: (N, n_rho, n_theta, P) -> (N, P)."""
    patches = np.asarray(patches, dtype=np.float64)
    expected = (op.n_vertices, op.n_rho, op.n_theta)
    if patches.ndim != 4 or patches.shape[:3] != expected:
        raise DimensionError(f"expected patches of shape {expected + ('P',)}, got {patches.shape}")
    flat = patches.reshape(-1, patches.shape[3])
    return op.matrix.T @ flat
