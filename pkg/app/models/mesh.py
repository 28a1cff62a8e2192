"""
Triangle mesh domain types.
A Mesh validates itself on construction and is immutable afterwards.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

from app.core.errors import MeshValidationError

# Faces with area at or below this (model units squared) are rejected
DEGENERATE_AREA_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class Mesh:
    """Oriented, edge-manifold triangle mesh with cached adjacency.

    vertices: (N, 3) float64 positions
    faces: (F, 3) int64 vertex indices, counter-clockwise
    edges: (E, 2) undirected edges, smaller index first
    edge_faces: (E, 2) incident faces per edge, -1 where the edge is on the boundary
    vertex_neighbors: per vertex, the 1-ring in cyclic order. Interior rings start at the
        lowest-index neighbor, boundary rings are open fans starting at a boundary edge.
    vertex_faces: per vertex, the fan of faces in the same cyclic order
    """

    def __init__(self, vertices, faces):
        v = np.array(vertices, dtype=np.float64)
        f = np.array(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshValidationError(f"vertices must have shape (N, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            if f.size == 0:
                f = f.reshape(0, 3)
            else:
                raise MeshValidationError(f"faces must have shape (F, 3), got {f.shape}")
        if len(f) == 0:
            raise MeshValidationError("mesh has no faces")
        if not np.all(np.isfinite(v)):
            raise MeshValidationError("vertex coordinates must be finite")

        self.vertices = _frozen(v)
        self.faces = _frozen(f)
        self._validate_faces()
        self._build_edges()
        self._build_rings()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def _validate_faces(self) -> None:
        n = self.n_vertices
        f = self.faces
        bad = np.nonzero((f < 0) | (f >= n))
        if len(bad[0]):
            fi = int(bad[0][0])
            raise MeshValidationError(f"face {fi} references vertex {int(f[fi, bad[1][0]])} outside [0, {n})")
        repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
        if repeated.any():
            fi = int(np.argmax(repeated))
            raise MeshValidationError(f"face {fi} repeats a vertex: {f[fi].tolist()}")
        areas = self.face_areas
        small = areas <= DEGENERATE_AREA_TOL
        if small.any():
            fi = int(np.argmax(small))
            raise MeshValidationError(f"face {fi} is degenerate (area {areas[fi]:.3e})")
        used = np.bincount(f.reshape(-1), minlength=n)
        if (used == 0).any():
            vi = int(np.argmax(used == 0))
            raise MeshValidationError(f"vertex {vi} is not referenced by any face")

    def _build_edges(self) -> None:
        n = self.n_vertices
        f = self.faces
        heads = f.reshape(-1)
        tails = f[:, [1, 2, 0]].reshape(-1)
        owner = np.repeat(np.arange(len(f)), 3)

        directed = heads * n + tails
        d_unique, d_counts = np.unique(directed, return_counts=True)
        if (d_counts > 1).any():
            key = int(d_unique[np.argmax(d_counts > 1)])
            raise MeshValidationError(
                f"inconsistent face orientation at edge ({key // n}, {key % n})"
            )

        lo = np.minimum(heads, tails)
        hi = np.maximum(heads, tails)
        keys = lo * n + hi
        unique, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if (counts > 2).any():
            key = int(unique[np.argmax(counts > 2)])
            raise MeshValidationError(
                f"edge ({key // n}, {key % n}) has {int(counts.max())} incident faces"
            )

        edge_faces = np.full((len(unique), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        slot = np.zeros(len(unique), dtype=np.int64)
        for half in order:
            e = inverse[half]
            edge_faces[e, slot[e]] = owner[half]
            slot[e] += 1

        self.edges = _frozen(np.column_stack((unique // n, unique % n)))
        self.edge_faces = _frozen(edge_faces)

    def _build_rings(self) -> None:
        n = self.n_vertices
        steps: List[Dict[int, Tuple[int, int]]] = [dict() for _ in range(n)]
        for fi, (a, b, c) in enumerate(self.faces.tolist()):
            steps[a][b] = (c, fi)
            steps[b][c] = (a, fi)
            steps[c][a] = (b, fi)

        neighbors = []
        fans = []
        boundary = np.zeros(n, dtype=bool)
        for vi in range(n):
            step = steps[vi]
            targets = {t for t, _ in step.values()}
            starts = [s for s in step if s not in targets]
            if len(starts) > 1:
                raise MeshValidationError(f"vertex {vi} is not a manifold fan ({len(starts)} boundary fans)")
            if starts:
                boundary[vi] = True
                start = starts[0]
            else:
                start = min(step)
            ring = [start]
            fan = []
            cur = start
            while cur in step:
                nxt, fi = step[cur]
                fan.append(fi)
                if nxt == start:
                    break
                ring.append(nxt)
                cur = nxt
                if len(fan) > len(step):
                    break
            if len(fan) != len(step):
                raise MeshValidationError(f"vertex {vi} is not a manifold fan (disconnected face fans)")
            neighbors.append(_frozen(np.array(ring, dtype=np.int64)))
            fans.append(_frozen(np.array(fan, dtype=np.int64)))

        self.vertex_neighbors: Tuple[np.ndarray, ...] = tuple(neighbors)
        self.vertex_faces: Tuple[np.ndarray, ...] = tuple(fans)
        self.boundary_vertices = _frozen(boundary)

    @cached_property
    def face_areas(self) -> np.ndarray:
        v = self.vertices
        f = self.faces
        cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return _frozen(0.5 * np.sqrt(np.sum(cr * cr, axis=1)))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return _frozen(np.sqrt(np.sum(d * d, axis=1)))

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_faces[:, 1] < 0

    @property
    def n_boundary_edges(self) -> int:
        return int(self.boundary_edge_mask.sum())

    @property
    def n_interior_edges(self) -> int:
        return len(self.edges) - self.n_boundary_edges

    def is_closed(self) -> bool:
        return self.n_boundary_edges == 0

    def scaled(self, factor: float) -> "Mesh":
        return Mesh(self.vertices * factor, self.faces)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "Mesh":
        return Mesh(self.vertices @ np.asarray(rotation).T + np.asarray(translation), self.faces)


@dataclass(frozen=True)
class VertexAreas:
    """Lumped per-vertex area elements (one third of the incident face areas)."""

    areas: np.ndarray
    total: float

    @property
    def n_vertices(self) -> int:
        return len(self.areas)
