import math

import numpy as np
import pytest

from app.core.errors import MeshParseError, MeshValidationError
from app.models.mesh import Mesh
from app.services.mesh_io import format_obj, load_mesh, parse_obj, parse_off, write_mesh
from app.services.mesh_ops import boundary_loops, geodesic_diameter, normalize_diameter, vertex_areas
from app.services.synthetic import annulus, bend_mesh, grid_plane, icosphere, jitter_planar, make_test_mesh


def euler_characteristic(mesh: Mesh) -> int:
    return mesh.n_vertices - len(mesh.edges) + mesh.n_faces


def test_grid_counts_and_topology():
    mesh = grid_plane(3, 3)
    assert mesh.n_vertices == 9
    assert mesh.n_faces == 8
    assert len(mesh.edges) == 16
    assert euler_characteristic(mesh) == 1
    assert not mesh.is_closed()
    assert mesh.n_boundary_edges == 8


def test_icosphere_is_closed_sphere():
    mesh = icosphere(1)
    assert (mesh.n_vertices, mesh.n_faces) == (42, 80)
    assert mesh.is_closed()
    assert euler_characteristic(mesh) == 2
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0)


def test_edges_are_sorted_and_unique():
    mesh = grid_plane(4, 3)
    assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])
    assert len({tuple(e) for e in mesh.edges.tolist()}) == len(mesh.edges)


def test_interior_ring_is_cyclic():
    mesh = grid_plane(3, 3)
    ring = mesh.vertex_neighbors[4].tolist()
    assert sorted(ring) == [0, 1, 3, 5, 7, 8]
    assert ring[0] == 0
    assert len(mesh.vertex_faces[4]) == 6
    # consecutive ring vertices share the fan face between them
    for k, fi in enumerate(mesh.vertex_faces[4].tolist()):
        face = set(mesh.faces[fi].tolist())
        assert {4, ring[k], ring[(k + 1) % len(ring)]} == face


def test_boundary_flags():
    mesh = grid_plane(3, 3)
    expected = np.ones(9, dtype=bool)
    expected[4] = False
    assert np.array_equal(mesh.boundary_vertices, expected)


def test_mesh_is_immutable():
    mesh = grid_plane(3, 3)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 5.0


@pytest.mark.parametrize(
    "faces, match",
    [
        ([[0, 1, 7]], "outside"),
        ([[0, 1, 1]], "repeats"),
        ([[0, 1, 2], [0, 1, 3]], "orientation"),
    ],
)
def test_invalid_faces_rejected(faces, match):
    vertices = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
    with pytest.raises(MeshValidationError, match=match):
        Mesh(vertices, faces)


def test_degenerate_face_rejected():
    with pytest.raises(MeshValidationError, match="degenerate"):
        Mesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])


def test_unreferenced_vertex_rejected():
    with pytest.raises(MeshValidationError, match="not referenced"):
        Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2]])


def test_vertex_areas_sum_to_surface_area():
    mesh = grid_plane(3, 3)
    areas = vertex_areas(mesh)
    assert areas.total == pytest.approx(4.0)
    assert areas.areas.sum() == pytest.approx(4.0)
    assert areas.areas[4] == pytest.approx(1.0)


def test_boundary_loops_of_annulus():
    mesh = annulus(0.5, 1.0, 3, 16)
    loops = boundary_loops(mesh)
    assert sorted(len(loop) for loop in loops) == [16, 16]
    radii = sorted(float(np.linalg.norm(mesh.vertices[loop[0]])) for loop in loops)
    assert radii == pytest.approx([0.5, 1.0])


def test_closed_mesh_has_no_boundary_loops():
    assert boundary_loops(icosphere(1)) == []


def test_grid_boundary_loop_follows_orientation():
    mesh = grid_plane(3, 3)
    (loop,) = boundary_loops(mesh)
    assert loop == [0, 1, 2, 5, 8, 7, 6, 3]


def test_off_round_trip_is_exact(tmp_path):
    mesh = jitter_planar(grid_plane(4, 4, 0.3), 0.05, seed=1)
    path = write_mesh(mesh, tmp_path / "jittered.off")
    loaded = load_mesh(path)
    assert np.array_equal(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.faces, mesh.faces)


def test_obj_writer_uses_one_based_indices():
    text = format_obj(grid_plane(2, 2))
    assert "f 1 2 4" in text.splitlines()


def test_obj_negative_indices_and_slashes():
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3/1/1 -2/2/2 -1/3/3\n"
    vertices, faces = parse_obj(text)
    assert faces == [[0, 1, 2]]
    assert len(vertices) == 3


def test_off_parse_error_reports_line():
    text = "OFF\n3 1 0\n0 0 x\n1 0 0\n0 1 0\n3 0 1 2\n"
    with pytest.raises(MeshParseError) as info:
        parse_off(text, "bad.off")
    assert info.value.line == 3
    assert "bad.off:3:" in info.value.message


def test_off_rejects_quads():
    text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
    with pytest.raises(MeshParseError, match="triangles"):
        parse_off(text)


def test_off_count_mismatch():
    text = "OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    with pytest.raises(MeshParseError, match="declares"):
        parse_off(text)


def test_unknown_extension(tmp_path):
    with pytest.raises(ValueError, match="Unsupported"):
        load_mesh(tmp_path / "mesh.ply")


def test_geodesic_diameter_of_unit_square():
    mesh = grid_plane(11, 11, 0.1)
    diameter = geodesic_diameter(mesh, sample_count=mesh.n_vertices)
    assert diameter == pytest.approx(math.sqrt(2.0), rel=0.02)


def test_normalize_diameter_gives_unit_diameter():
    mesh = jitter_planar(grid_plane(6, 6, 0.5), 0.05, seed=2)
    scaled, diameter = normalize_diameter(mesh, sample_count=8, seed=4)
    assert diameter > 0
    assert geodesic_diameter(scaled, sample_count=8, seed=4) == pytest.approx(1.0, rel=1e-9)


def test_bend_places_vertices_on_cylinder():
    plane = grid_plane(5, 5, 0.25).transformed(np.eye(3), np.array([-0.5, -0.5, 0.0]))
    radius = 0.8
    bent = bend_mesh(plane, radius)
    x, z = bent.vertices[:, 0], bent.vertices[:, 2]
    assert np.allclose(x * x + (z - radius) ** 2, radius * radius)
    assert np.array_equal(bent.vertices[:, 1], plane.vertices[:, 1])


def test_make_test_mesh_dispatch():
    assert make_test_mesh("grid_plane", nx=4, ny=2).n_vertices == 8
    assert make_test_mesh("icosphere", subdivisions=0).n_vertices == 12
    with pytest.raises(ValueError, match="Unknown"):
        make_test_mesh("torus")


TETRAHEDRON_OFF = """OFF
4 4 0
1 1 1
1 -1 -1
-1 1 -1
-1 -1 1
3 0 1 2
3 0 3 1
3 0 2 3
3 1 3 2
"""


def test_off_tetrahedron_is_closed():
    vertices, faces = parse_off(TETRAHEDRON_OFF)
    # edge length 2*sqrt(2) scaled to 1
    mesh = Mesh([[c / (2 * math.sqrt(2)) for c in v] for v in vertices], faces)
    assert (mesh.n_vertices, mesh.n_faces) == (4, 4)
    assert mesh.is_closed()
    assert mesh.n_boundary_edges == 0
    assert euler_characteristic(mesh) == 2
    assert np.allclose(vertex_areas(mesh).areas, math.sqrt(3) / 4)


def test_off_single_triangle(tmp_path):
    path = tmp_path / "triangle.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    mesh = load_mesh(path)
    assert len(mesh.edges) == 3
    assert mesh.n_boundary_edges == 3
    assert mesh.n_interior_edges == 0
    assert mesh.boundary_vertices.all()
    assert np.allclose(vertex_areas(mesh).areas, 1.0 / 6.0)


def test_geodesic_diameter_of_unit_sphere():
    diameter = geodesic_diameter(icosphere(3), sample_count=4, seed=0)
    assert diameter == pytest.approx(math.pi, rel=0.03)
