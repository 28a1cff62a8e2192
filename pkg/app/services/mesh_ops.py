"""
Mesh measurements: lumped vertex areas, boundary loops, geodesic diameter.
"""
import logging
import math
from typing import List, Tuple

import numpy as np

from app.core.errors import DisconnectedMeshError
from app.models.mesh import Mesh, VertexAreas
from app.services.fast_marching import fast_marching

logger = logging.getLogger(__name__)


def vertex_areas(mesh: Mesh) -> VertexAreas:
    """Each vertex receives one third of the area of every incident face."""
    area3 = np.repeat(mesh.face_areas[:, np.newaxis], 3, axis=1)
    areas = np.bincount(mesh.faces.reshape(-1), area3.reshape(-1), minlength=mesh.n_vertices) / 3.0
    return VertexAreas(areas=areas, total=float(mesh.face_areas.sum()))


def boundary_loops(mesh: Mesh) -> List[List[int]]:
    """Boundary cycles following face orientation; empty for closed meshes."""
    half_edges = set()
    for a, b, c in mesh.faces.tolist():
        half_edges.update(((a, b), (b, c), (c, a)))
    nxt = {u: w for (u, w) in half_edges if (w, u) not in half_edges}

    loops = []
    seen = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(loop)
    return loops


def geodesic_diameter(mesh: Mesh, sample_count: int, seed: int = 0) -> float:
    """Largest fast-marching distance over sampled sources (a lower bound on the diameter)."""
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    n = mesh.n_vertices
    if sample_count >= n:
        sources = np.arange(n)
    else:
        rng = np.random.default_rng(seed)
        sources = np.sort(rng.choice(n, size=sample_count, replace=False))

    diameter = 0.0
    for source in sources:
        field = fast_marching(mesh, int(source), math.inf)
        if not np.all(np.isfinite(field.distances)):
            unreached = int(np.argmax(~np.isfinite(field.distances)))
            raise DisconnectedMeshError(f"vertex {unreached} is unreachable from vertex {int(source)}")
        diameter = max(diameter, float(field.distances.max()))
    logger.debug("Geodesic diameter %.6f from %d sources", diameter, len(sources))
    return diameter


def normalize_diameter(mesh: Mesh, sample_count: int, seed: int = 0) -> Tuple[Mesh, float]:
    """Scale the mesh to unit geodesic diameter; returns the scaled mesh and the original diameter."""
    diameter = geodesic_diameter(mesh, sample_count, seed)
    return mesh.scaled(1.0 / diameter), diameter
