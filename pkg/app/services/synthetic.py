"""
Deterministic synthetic meshes used as fixtures and for desk-scale experiments.
"""
import math
from typing import Dict, Tuple

import numpy as np

from app.models.mesh import Mesh

MESH_KINDS = ("grid_plane", "icosphere", "annulus")

_T = (1.0 + math.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = [
    (-1, _T, 0), (1, _T, 0), (-1, -_T, 0), (1, -_T, 0),
    (0, -1, _T), (0, 1, _T), (0, -1, -_T), (0, 1, -_T),
    (_T, 0, -1), (_T, 0, 1), (-_T, 0, -1), (-_T, 0, 1),
]
_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def grid_plane(nx: int, ny: int, spacing: float = 1.0) -> Mesh:
    """Planar nx-by-ny vertex grid in z=0, each cell split along its (i,j)-(i+1,j+1) diagonal."""
    if nx < 2 or ny < 2:
        raise ValueError(f"grid_plane needs at least 2x2 vertices, got {nx}x{ny}")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing)
    vertices = np.column_stack((xs.ravel(), ys.ravel(), np.zeros(nx * ny)))
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            v00 = j * nx + i
            v10 = v00 + 1
            v01 = v00 + nx
            v11 = v01 + 1
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return Mesh(vertices, faces)


def icosphere(subdivisions: int, radius: float = 1.0) -> Mesh:
    """Subdivided icosahedron projected onto a sphere, faces oriented outward."""
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    if radius <= 0:
        raise ValueError("radius must be positive")
    vertices = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in _ICOSAHEDRON_VERTICES]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(subdivisions):
        midpoints: Dict[Tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined

    v = np.array(vertices) * radius
    f = np.array(faces, dtype=np.int64)
    # orient outward
    normals = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    inward = np.sum(normals * v[f].mean(axis=1), axis=1) < 0
    f[inward] = f[inward][:, [0, 2, 1]]
    return Mesh(v, f)


def annulus(inner_radius: float, outer_radius: float, n_radial: int, n_angular: int) -> Mesh:
    """Planar ring with n_radial concentric vertex circles of n_angular vertices each."""
    if n_radial < 2 or n_angular < 3:
        raise ValueError("annulus needs n_radial >= 2 and n_angular >= 3")
    if not 0 < inner_radius < outer_radius:
        raise ValueError("annulus needs 0 < inner_radius < outer_radius")
    radii = np.linspace(inner_radius, outer_radius, n_radial)
    angles = 2.0 * np.pi * np.arange(n_angular) / n_angular
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    vertices = np.column_stack((rr.ravel() * np.cos(aa.ravel()), rr.ravel() * np.sin(aa.ravel()), np.zeros(rr.size)))
    faces = []
    for i in range(n_radial - 1):
        for j in range(n_angular):
            jn = (j + 1) % n_angular
            a, b = i * n_angular + j, i * n_angular + jn
            c, d = (i + 1) * n_angular + j, (i + 1) * n_angular + jn
            faces.append((a, c, d))
            faces.append((a, d, b))
    return Mesh(vertices, faces)


def make_test_mesh(kind: str, **params) -> Mesh:
    """Build a synthetic mesh by kind name: grid_plane, icosphere or annulus."""
    if kind == "grid_plane":
        return grid_plane(params.get("nx", 3), params.get("ny", 3), params.get("spacing", 1.0))
    if kind == "icosphere":
        return icosphere(params.get("subdivisions", 0), params.get("radius", 1.0))
    if kind == "annulus":
        return annulus(
            params.get("inner_radius", 0.5),
            params.get("outer_radius", 1.0),
            params.get("n_radial", 3),
            params.get("n_angular", 16),
        )
    raise ValueError(f"Unknown test mesh kind {kind!r}; expected one of {MESH_KINDS}")


def jitter_planar(mesh: Mesh, amount: float, seed: int = 0) -> Mesh:
    """Perturb vertices inside the z=0 plane; breaks grid symmetries while staying flat."""
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-amount, amount, size=(mesh.n_vertices, 2))
    v = mesh.vertices.copy()
    v[:, :2] += offsets
    return Mesh(v, mesh.faces)


def bend_mesh(mesh: Mesh, radius: float) -> Mesh:
    """Roll a planar (z=0) mesh onto a cylinder of the given radius around an axis parallel to y.

    The map (x, y) -> (r sin(x/r), y, r (1 - cos(x/r))) is an isometry of the plane,
    so the bent copy has the same intrinsic geometry.
    """
    v = mesh.vertices
    x, y = v[:, 0], v[:, 1]
    bent = np.column_stack((radius * np.sin(x / radius), y, radius * (1.0 - np.cos(x / radius))))
    return Mesh(bent, mesh.faces)
