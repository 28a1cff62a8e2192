"""
Fast marching on triangle meshes.

Distances are propagated with the triangle update of a virtual planar source: the two
accepted corners of a face are unfolded into the plane together with a point at their
current distances, and the third corner receives its straight-line distance to that point
whenever the connecting ray crosses the opposite edge. Otherwise the edge update
d(A) + |AC| applies. The same unfolding yields the polar angle used by local charts; after an
edge update the face is laid against the chart positions of both accepted corners instead.
"""
import heapq
import logging
import math
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra as csgraph_dijkstra

from app.models.charting import DistanceField
from app.models.mesh import Mesh

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# Relative slack on the crossing test along the opposite edge
CROSSING_TOL = 1e-12


class MarchResult(NamedTuple):
    distances: np.ndarray
    theta: Optional[np.ndarray]
    order: List[int]


def _corner_angle(opposite: float, left: float, right: float) -> float:
    cos = (left * left + right * right - opposite * opposite) / (2.0 * left * right)
    return math.acos(min(1.0, max(-1.0, cos)))


def fan_angles(mesh: Mesh, center: int) -> Tuple[np.ndarray, float]:
    """Polar angles of the 1-ring of center and the scale applied to face angles.

    Interior fans are stretched to 2*pi, boundary fans to pi, starting at the first ring vertex.
    """
    ring = mesh.vertex_neighbors[center].tolist()
    pos = mesh.vertices
    corner = []
    for k in range(len(mesh.vertex_faces[center])):
        u, w = ring[k], ring[(k + 1) % len(ring)]
        corner.append(
            _corner_angle(
                float(np.linalg.norm(pos[u] - pos[w])),
                float(np.linalg.norm(pos[u] - pos[center])),
                float(np.linalg.norm(pos[w] - pos[center])),
            )
        )
    total = sum(corner)
    scale = (math.pi if mesh.boundary_vertices[center] else TWO_PI) / total
    angles = np.zeros(len(ring))
    angles[1:] = np.cumsum(corner)[: len(ring) - 1] * scale
    return np.mod(angles, TWO_PI), scale


def _unfold_corner(l_ab: float, l_ac: float, l_bc: float) -> Tuple[float, float]:
    """Position of C in the frame A=(0,0), B=(l_ab,0) with C above AB."""
    cx = (l_ac * l_ac - l_bc * l_bc + l_ab * l_ab) / (2.0 * l_ab)
    return cx, math.sqrt(max(l_ac * l_ac - cx * cx, 0.0))


def _triangle_update(d_a: float, d_b: float, l_ab: float, l_ac: float, l_bc: float):
    """Unfold face (A, B, C) with A=(0,0), B=(l_ab,0), C above AB.

    Returns (distance, source_xy, c_xy) or None when the virtual source does not exist
    or its ray to C misses the edge AB.
    """
    c = l_ab
    cx, cy = _unfold_corner(l_ab, l_ac, l_bc)
    sx = (d_a * d_a - d_b * d_b + c * c) / (2.0 * c)
    sy2 = d_a * d_a - sx * sx
    if sy2 < 0.0:
        return None
    sy = -math.sqrt(sy2)
    rise = cy - sy
    if rise <= 0.0:
        return None
    x_cross = sx + (-sy / rise) * (cx - sx)
    if x_cross < -CROSSING_TOL * c or x_cross > c * (1.0 + CROSSING_TOL):
        return None
    distance = math.hypot(cx - sx, cy - sy)
    return max(distance, d_a, d_b), (sx, sy), (cx, cy)


def _signed_angle(ux: float, uy: float, wx: float, wy: float) -> float:
    return math.atan2(ux * wy - uy * wx, ux * wx + uy * wy)


def march(mesh: Mesh, source: int, rho_max: float, track_angles: bool = False) -> MarchResult:
    """Run the front from source until the smallest trial distance exceeds rho_max."""
    n = mesh.n_vertices
    if not 0 <= source < n:
        raise ValueError(f"source {source} outside [0, {n})")
    if not rho_max > 0:
        raise ValueError("rho_max must be positive")

    pos = mesh.vertices.tolist()
    faces = mesh.faces.tolist()
    vertex_faces = mesh.vertex_faces

    dist = [math.inf] * n
    theta = [0.0] * n
    accepted = [False] * n
    locked = [False] * n
    # angle set by unfolding a face with two accepted corners
    unfolded = [False] * n
    heap: List[Tuple[float, int]] = []

    dist[source] = 0.0
    accepted[source] = True
    order = [source]

    ring = mesh.vertex_neighbors[source].tolist()
    scale = 1.0
    if track_angles:
        ring_theta, scale = fan_angles(mesh, source)
    for k, v in enumerate(ring):
        # 1-ring distances are exact edge lengths
        dist[v] = math.dist(pos[source], pos[v])
        locked[v] = True
        if track_angles:
            theta[v] = float(ring_theta[k])
        heapq.heappush(heap, (dist[v], v))

    while heap:
        d, v = heapq.heappop(heap)
        if accepted[v] or d > dist[v]:
            continue
        if d > rho_max:
            break
        accepted[v] = True
        order.append(v)
        for fi in vertex_faces[v]:
            face = faces[fi]
            for i in range(3):
                c = face[i]
                if accepted[c] or locked[c]:
                    continue
                a, b = face[(i + 1) % 3], face[(i + 2) % 3]
                candidate, angle, two_corner = _update(
                    c, a, b, pos, dist, theta, accepted, source, scale, track_angles
                )
                if candidate < dist[c]:
                    dist[c] = candidate
                    theta[c] = angle
                    unfolded[c] = two_corner
                    heapq.heappush(heap, (candidate, c))
                elif track_angles and two_corner and not unfolded[c] and candidate == dist[c]:
                    theta[c] = angle
                    unfolded[c] = True

    distances = np.array([dist[i] if accepted[i] else math.inf for i in range(n)])
    angles = None
    if track_angles:
        angles = np.array([theta[i] if accepted[i] else 0.0 for i in range(n)])
    return MarchResult(distances, angles, order)


def _chart_point(v: int, dist, theta) -> Tuple[float, float]:
    return dist[v] * math.cos(theta[v]), dist[v] * math.sin(theta[v])


def _placed_angle(
    pa: Tuple[float, float], pb: Tuple[float, float], l_ab: float, cx: float, cy: float, from_b: bool
) -> Optional[float]:
    """Polar angle of C after laying face (A, B, C) rigidly against the chart points of A and B.

    C keeps its offset from the corner it was reached through (B when from_b).
    """
    ex, ey = pb[0] - pa[0], pb[1] - pa[1]
    norm = math.hypot(ex, ey)
    if norm == 0.0:
        return None
    ex, ey = ex / norm, ey / norm
    ox, oy = pb if from_b else pa
    lx = cx - l_ab if from_b else cx
    angle = math.atan2(oy + lx * ey + cy * ex, ox + lx * ex - cy * ey)
    return angle + TWO_PI if angle < 0.0 else angle


def _update(c, a, b, pos, dist, theta, accepted, source, scale, track_angles):
    """Best candidate distance and angle for C from face (A, B, C), CCW ordered.

    The flag tells whether the angle came from unfolding the face against both corners.
    """
    l_ac = math.dist(pos[a], pos[c])
    l_bc = math.dist(pos[b], pos[c])
    best = math.inf
    angle = 0.0
    from_b = False
    if accepted[a] and dist[a] + l_ac < best:
        best = dist[a] + l_ac
        angle = theta[a]
    if accepted[b] and dist[b] + l_bc < best:
        best = dist[b] + l_bc
        angle = theta[b]
        from_b = True
    if not (accepted[a] and accepted[b]):
        return best, angle, False

    l_ab = math.dist(pos[a], pos[b])
    unfolded = _triangle_update(dist[a], dist[b], l_ab, l_ac, l_bc)
    if unfolded is not None and unfolded[0] < best:
        d_tri, (sx, sy), (cx, cy) = unfolded
        if track_angles:
            if a == source:
                ref, (rx, ry) = b, (l_ab, 0.0)
            else:
                ref, (rx, ry) = a, (0.0, 0.0)
            delta = _signed_angle(rx - sx, ry - sy, cx - sx, cy - sy)
            angle = math.fmod(theta[ref] + scale * delta, TWO_PI)
            if angle < 0.0:
                angle += TWO_PI
        return d_tri, angle, True

    # edge update: the distance runs through one corner, the angle comes from the unfolded face
    if track_angles:
        cx, cy = _unfold_corner(l_ab, l_ac, l_bc)
        placed = _placed_angle(_chart_point(a, dist, theta), _chart_point(b, dist, theta), l_ab, cx, cy, from_b)
        if placed is not None:
            return best, placed, True
    return best, angle, False


def fast_marching(mesh: Mesh, source: int, rho_max: float = math.inf) -> DistanceField:
    """Geodesic distance field from source, truncated at rho_max."""
    result = march(mesh, source, rho_max)
    return DistanceField(source=int(source), distances=result.distances, reach=float(rho_max))


def edge_graph(mesh: Mesh) -> sparse.csr_matrix:
    """Symmetric sparse adjacency weighted by Euclidean edge lengths."""
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    w = mesh.edge_lengths
    n = mesh.n_vertices
    return sparse.coo_matrix(
        (np.concatenate((w, w)), (np.concatenate((i, j)), np.concatenate((j, i)))), shape=(n, n)
    ).tocsr()


def dijkstra(mesh: Mesh, source: int) -> np.ndarray:
    """Shortest edge-path distances from source (upper bound for fast marching)."""
    return csgraph_dijkstra(edge_graph(mesh), directed=False, indices=int(source))
