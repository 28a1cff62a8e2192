import math

import numpy as np
import pytest
from scipy import linalg
from scipy.spatial.transform import Rotation

from app.core.errors import DimensionError, InsufficientDataError
from app.models.spectral import DescriptorField, Provenance
from app.services.mesh_ops import vertex_areas
from app.services.spectral import (
    compute_spectrum,
    cotangent_matrix,
    default_hks_times,
    default_wks_energies,
    eigensystem,
    heat_diffusion,
    heat_kernel,
    hks,
    spectral_descriptor,
    transfer_descriptor,
    wks,
)
from app.services.spline import clamped_knots, evaluate, geometry_vectors, make_basis, spline_basis
from app.services.synthetic import grid_plane, icosphere, jitter_planar


@pytest.fixture(scope="module")
def jittered():
    return jitter_planar(grid_plane(10, 10, 0.1), 0.02, seed=11)


@pytest.fixture(scope="module")
def jittered_eig(jittered):
    return compute_spectrum(jittered, vertex_areas(jittered), 50)


@pytest.fixture(scope="module")
def sphere_eig():
    mesh = icosphere(3)
    return compute_spectrum(mesh, vertex_areas(mesh), 25)


def test_stiffness_is_symmetric_with_zero_row_sums(jittered):
    s = cotangent_matrix(jittered)
    assert s.is_symmetric()
    assert np.abs(s.row_sums()).max() < 1e-12
    assert linalg.eigvalsh(s.matrix.toarray()).min() > -1e-10


def test_stiffness_annihilates_linear_functions_inside():
    mesh = jitter_planar(grid_plane(6, 6, 0.2), 0.03, seed=2)
    s = cotangent_matrix(mesh).matrix
    interior = ~mesh.boundary_vertices
    for axis in (0, 1):
        assert np.abs((s @ mesh.vertices[:, axis])[interior]).max() < 1e-12


def test_eigensystem_matches_dense_oracle(jittered, jittered_eig):
    s = cotangent_matrix(jittered).matrix.toarray()
    a = vertex_areas(jittered).areas
    expected = linalg.eigh(s, np.diag(a), eigvals_only=True)[:50]
    lam = jittered_eig.eigenvalues
    assert lam[0] <= 1e-8 * lam[-1]
    assert np.allclose(lam[1:], expected[1:], rtol=1e-6, atol=0)


def test_eigenfunctions_are_mass_orthonormal(jittered_eig):
    phi = jittered_eig.eigenfunctions
    gram = phi.T @ (jittered_eig.mass.areas[:, None] * phi)
    assert np.abs(gram - np.eye(jittered_eig.k)).max() <= 1e-8


def test_first_eigenfunction_is_constant(jittered_eig):
    first = jittered_eig.eigenfunctions[:, 0]
    assert np.ptp(first) < 1e-8 * np.abs(first).max()
    assert first[0] > 0
    assert np.all(np.diff(jittered_eig.eigenvalues) >= 0)


def test_sparse_solver_agrees_with_dense(jittered, jittered_eig):
    s = cotangent_matrix(jittered)
    sparse_eig = eigensystem(s, vertex_areas(jittered), 20, dense_limit=10)
    assert np.allclose(sparse_eig.eigenvalues[1:], jittered_eig.eigenvalues[1:20], rtol=1e-8)


def test_too_many_eigenpairs_rejected(jittered):
    with pytest.raises(DimensionError):
        eigensystem(cotangent_matrix(jittered), vertex_areas(jittered), jittered.n_vertices + 1)


def test_sphere_spectrum_clusters(sphere_eig):
    lam = sphere_eig.eigenvalues
    start = 1
    for degree in range(1, 5):
        size = 2 * degree + 1
        cluster = lam[start : start + size]
        assert cluster.mean() == pytest.approx(degree * (degree + 1), rel=0.05)
        start += size


def test_hks_and_wks_are_nearly_constant_on_sphere(sphere_eig):
    heat = spectral_descriptor(sphere_eig, Provenance.HKS, 8)
    wave = spectral_descriptor(sphere_eig, Provenance.WKS, 8)
    for field in (heat, wave):
        values = field.values
        assert np.all(values.std(axis=0) <= 0.02 * values.mean(axis=0))


def test_geometry_vectors_match_transfer_form(jittered_eig, rng):
    basis = spline_basis(jittered_eig, 12)
    g = geometry_vectors(jittered_eig, basis).values
    coefficients = rng.standard_normal((5, 12))
    tau = evaluate(basis, jittered_eig.eigenvalues) @ coefficients.T
    direct = transfer_descriptor(jittered_eig, tau).values
    assert np.allclose(g @ coefficients.T, direct, rtol=0, atol=1e-10)


def test_hks_is_transfer_of_exponentials(jittered_eig):
    times = np.array([0.01, 0.1, 1.0])
    field = hks(jittered_eig, times)
    assert field.provenance is Provenance.HKS
    for q, t in enumerate(times):
        expected = [heat_kernel(jittered_eig, t, i, i) for i in range(0, jittered_eig.n_vertices, 17)]
        assert np.allclose(field.values[::17, q], expected)


def test_wks_skips_zero_eigenvalue(jittered_eig):
    energies, sigma = default_wks_energies(jittered_eig, 6)
    field = wks(jittered_eig, energies, sigma)
    assert np.all(np.isfinite(field.values))
    assert field.values.shape == (jittered_eig.n_vertices, 6)


def test_descriptor_grids_validated(jittered_eig):
    with pytest.raises(ValueError):
        hks(jittered_eig, [0.1, -1.0])
    with pytest.raises(ValueError):
        hks(jittered_eig, [1.0, 0.1])
    with pytest.raises(ValueError):
        wks(jittered_eig, [1.0], 0.0)


def test_default_hks_times_span(jittered_eig):
    times = default_hks_times(jittered_eig, 16)
    lam = jittered_eig.eigenvalues
    assert times[0] == pytest.approx(4 * np.log(10) / lam[-1])
    assert times[-1] == pytest.approx(4 * np.log(10) / lam[1])


def test_heat_kernel_symmetry(jittered_eig):
    assert heat_kernel(jittered_eig, 0.05, 3, 40) == pytest.approx(heat_kernel(jittered_eig, 0.05, 40, 3))


def test_heat_diffusion_conserves_mass_and_smooths():
    mesh = grid_plane(5, 5, 0.25)
    areas = vertex_areas(mesh)
    eig = compute_spectrum(mesh, areas, mesh.n_vertices)
    u0 = np.zeros(mesh.n_vertices)
    u0[12] = 1.0
    assert np.allclose(heat_diffusion(eig, u0, 0.0), u0, atol=1e-8)
    u = heat_diffusion(eig, u0, 0.01)
    assert np.dot(areas.areas, u) == pytest.approx(np.dot(areas.areas, u0))
    assert u.max() < 1.0


def test_spectral_range_needs_two_positive_eigenvalues(jittered_eig):
    with pytest.raises(InsufficientDataError):
        default_hks_times(jittered_eig.truncated(2))


def test_spline_partition_of_unity():
    basis = make_basis(-2.0, 3.0, 10, 3, log_domain=False)
    table = evaluate(basis, np.linspace(-2.0, 3.0, 57))
    assert np.allclose(table.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(table >= 0)


def test_spline_zero_outside_span(jittered_eig):
    basis = spline_basis(jittered_eig, 8)
    lam = jittered_eig.eigenvalues
    table = evaluate(basis, np.array([0.0, lam[1] * 0.5, lam[-1] * 2.0, lam[5]]))
    assert np.all(table[:3] == 0.0)
    assert table[3].sum() == pytest.approx(1.0)


def test_clamped_knots():
    knots = clamped_knots(0.0, 1.0, 6, 3)
    assert len(knots) == 6 + 3 + 1
    assert np.all(knots[:4] == 0.0) and np.all(knots[-4:] == 1.0)
    with pytest.raises(ValueError):
        clamped_knots(0.0, 1.0, 3, 3)


def test_descriptor_field_rejects_non_finite():
    with pytest.raises(ValueError):
        DescriptorField(np.array([[1.0, np.nan]]), Provenance.HKS)
    with pytest.raises(DimensionError):
        DescriptorField(np.ones(3), Provenance.HKS)


HKS_TIMES = np.array([0.001, 0.01, 0.1])


def test_rigid_motion_leaves_spectrum_unchanged(jittered, jittered_eig):
    rotation = Rotation.from_euler("zyx", [0.4, -1.2, 2.1]).as_matrix()
    moved = jittered.transformed(rotation, np.array([1.5, -2.0, 0.7]))
    diff = cotangent_matrix(moved).matrix - cotangent_matrix(jittered).matrix
    assert np.abs(diff.toarray()).max() < 1e-9
    eig = compute_spectrum(moved, vertex_areas(moved), 50)
    assert np.allclose(eig.eigenvalues, jittered_eig.eigenvalues, rtol=1e-9, atol=1e-9)
    assert np.allclose(hks(eig, HKS_TIMES).values, hks(jittered_eig, HKS_TIMES).values, rtol=1e-8, atol=1e-9)


def test_uniform_scaling_rescales_eigenvalues_and_times(jittered, jittered_eig):
    s = 2.5
    scaled = jittered.scaled(s)
    eig = compute_spectrum(scaled, vertex_areas(scaled), 50)
    lam = jittered_eig.eigenvalues
    assert np.allclose(eig.eigenvalues, lam / s**2, rtol=1e-8, atol=1e-10 * lam[-1])
    # eigenfunctions shrink by 1/s under the scaled mass
    heat = hks(eig, s**2 * HKS_TIMES).values * s**2
    assert np.allclose(heat, hks(jittered_eig, HKS_TIMES).values, rtol=1e-8)


def test_more_eigenpairs_keep_the_leading_ones(jittered, jittered_eig):
    leading = compute_spectrum(jittered, vertex_areas(jittered), 20)
    assert np.allclose(leading.eigenvalues, jittered_eig.eigenvalues[:20], rtol=1e-10, atol=1e-10)


def test_single_eigenpair_heat_kernel_is_inverse_area(jittered_eig):
    eig = jittered_eig.truncated(1)
    total = eig.mass.total
    for t in (0.0, 1.0, 100.0):
        assert heat_kernel(eig, t, 0, 57) == pytest.approx(1.0 / total, rel=1e-8)
    assert np.allclose(hks(eig, [0.5, 5.0]).values, 1.0 / total, rtol=1e-8)


def test_heat_kernel_mass_weighted_rows_sum_to_one(jittered_eig):
    areas = jittered_eig.mass.areas
    for i in (0, 44):
        row = np.array([heat_kernel(jittered_eig, 0.01, i, j) for j in range(jittered_eig.n_vertices)])
        assert np.dot(row, areas) == pytest.approx(1.0, abs=1e-8)


def test_hks_tends_to_constant_for_large_times(jittered_eig):
    t = 1000.0 / jittered_eig.eigenvalues[1]
    values = hks(jittered_eig, [t]).values
    assert np.allclose(values, 1.0 / jittered_eig.mass.total, rtol=1e-6)


def test_wks_of_one_positive_eigenpair(jittered_eig):
    eig = jittered_eig.truncated(2)
    field = wks(eig, [eig.eigenvalues[1]], 0.5)
    assert np.allclose(field.values[:, 0], eig.eigenfunctions[:, 1] ** 2, rtol=1e-12)


def test_wks_with_vanishing_band_between_eigenvalues(jittered_eig):
    lam = jittered_eig.eigenvalues[1:]
    gaps = np.diff(np.log(lam))
    k = int(np.argmax(gaps))
    energy = math.sqrt(lam[k] * lam[k + 1])
    field = wks(jittered_eig, [energy], gaps[k] / 40.0)
    assert np.abs(field.values).max() < 1e-12
