import numpy as np
import pytest

from app.core.errors import DimensionError
from app.models.curves import Curve, CurveKind
from app.services.evaluation import (
    cmc,
    correspondence_errors,
    covariance_descriptor,
    descriptor_distance_map,
    format_curve_csv,
    match_ranks,
    pair_distances,
    precision_recall,
    princeton,
    rank_gallery,
    roc,
    roc_auc,
    write_curve_csv,
)
from app.services.synthetic import grid_plane


def test_cmc_on_one_hot_descriptors():
    ref = np.eye(6)
    gt = np.array([3, 0, 5, 1])
    curve = cmc(ref[gt], ref, gt)
    assert curve.kind is CurveKind.CMC
    assert np.array_equal(curve.abscissa, np.arange(1, 7))
    assert np.all(curve.ordinate == 1.0)


def test_match_ranks_break_ties_low():
    ref = np.array([[0.0], [1.0], [1.0], [3.0]])
    query = np.array([[1.0], [1.0]])
    ranks = match_ranks(query, ref, np.array([1, 2]))
    assert ranks.tolist() == [1, 2]


def test_cmc_partial():
    ref = np.array([[0.0], [1.0], [2.0]])
    query = np.array([[0.0], [0.9], [0.4]])
    # third query's true match (2) ranks last
    curve = cmc(query, ref, np.array([0, 1, 2]), k_max=3)
    assert curve.ordinate.tolist() == pytest.approx([2 / 3, 2 / 3, 1.0])
    with pytest.raises(ValueError):
        cmc(query, ref, np.array([0, 1, 2]), k_max=4)


def test_match_ranks_checks():
    with pytest.raises(DimensionError):
        match_ranks(np.zeros((2, 3)), np.zeros((4, 3)), np.array([0]))
    with pytest.raises(DimensionError):
        match_ranks(np.zeros((1, 3)), np.zeros((4, 2)), np.array([0]))
    with pytest.raises(ValueError):
        match_ranks(np.zeros((1, 3)), np.zeros((4, 3)), np.array([4]))


def test_roc_separable_and_identical():
    separable = roc(np.array([0.1, 0.2, 0.3]), np.array([0.7, 0.8]))
    assert roc_auc(separable) == pytest.approx(1.0)
    assert np.all(np.diff(separable.abscissa) >= 0)
    same = roc(np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    assert roc_auc(same) == pytest.approx(0.5)


def test_roc_needs_both_classes():
    with pytest.raises(ValueError):
        roc(np.array([]), np.array([0.1]))
    with pytest.raises(ValueError):
        roc_auc(Curve(CurveKind.CMC, np.array([1.0]), np.array([1.0])))


def test_pair_distances():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    b = np.array([[3.0, 4.0], [1.0, 1.0]])
    assert pair_distances(a, b, np.array([[0, 0], [1, 1], [1, 0]])).tolist() == pytest.approx([5.0, 0.0, np.sqrt(13)])


def test_princeton_exact_matches():
    mesh = grid_plane(6, 6, 0.2)
    gt = np.arange(mesh.n_vertices)
    curve = princeton(gt, gt, mesh, r_max=0.25, diameter=1.0)
    assert curve.kind is CurveKind.PRINCETON
    assert len(curve.abscissa) == 101
    assert np.all(curve.ordinate == 1.0)


def test_princeton_counts_by_geodesic_error():
    mesh = grid_plane(6, 6, 0.2)
    gt = np.array([0, 7, 14])
    predicted = np.array([0, 8, 26])  # errors 0, 0.2, 0.4 (along straight edges)
    curve = princeton(predicted, gt, mesh, r_max=0.5, diameter=1.0)
    assert curve.at(0.0) == pytest.approx(1 / 3)
    assert curve.at(0.25) == pytest.approx(2 / 3)
    assert curve.at(0.5) == pytest.approx(1.0)


def test_correspondence_errors_reuse_fields():
    mesh = grid_plane(4, 4, 1.0)
    fields = {}
    errors = correspondence_errors(np.array([1, 2]), np.array([0, 0]), mesh, fields)
    assert errors.tolist() == pytest.approx([1.0, 2.0])
    assert list(fields) == [0]
    with pytest.raises(DimensionError):
        correspondence_errors(np.array([1]), np.array([0, 0]), mesh)


def test_rank_gallery_leaves_query_out():
    desc = np.array([[0.0], [1.0], [5.0], [1.5]])
    rankings = rank_gallery(desc)
    assert rankings[0].tolist() == [1, 3, 2]
    assert all(q not in r for q, r in enumerate(rankings))


def test_precision_recall_clean_classes():
    desc = np.array([[0.0], [0.1], [10.0], [10.1]])
    curve = precision_recall(rank_gallery(desc), ["a", "a", "b", "b"])
    assert len(curve.abscissa) == 11
    assert np.allclose(curve.ordinate, 1.0)


def test_precision_recall_skips_singletons():
    desc = np.array([[0.0], [0.1], [10.0]])
    curve = precision_recall(rank_gallery(desc), ["a", "a", "b"])
    assert curve.metadata == {"queries": 2, "skipped": 1}
    with pytest.raises(ValueError):
        precision_recall(rank_gallery(desc[:2]), ["a", "b"])


def test_descriptor_distance_map():
    values = np.array([[0.0], [1.0], [2.0], [4.0]])
    d = descriptor_distance_map(values, 0)
    # median of [0, 1, 2, 4] is 1.5
    assert d.tolist() == pytest.approx([0.0, 1 / 1.5, 1.0, 1.0])
    assert descriptor_distance_map(np.ones((3, 2)), 1).tolist() == [0.0, 0.0, 0.0]


def test_covariance_descriptor_is_symmetric(rng):
    vec = covariance_descriptor(rng.standard_normal((30, 4)), np.ones(30))
    cov = vec.reshape(4, 4, order="F")
    assert np.allclose(cov, cov.T)


def test_curve_csv(tmp_path):
    curve = cmc(np.eye(3), np.eye(3), np.arange(3))
    text = format_curve_csv(curve)
    assert text.splitlines() == ["rank,cmc", "1,1.0", "2,1.0", "3,1.0"]
    path = write_curve_csv(roc(np.array([0.1]), np.array([0.9])), tmp_path / "roc.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "fpr,tpr"
    assert lines[1] == "0.0,0.0"
    assert lines[-1] == "1.0,1.0"
