"""
Evaluation protocols: CMC, ROC, Princeton correspondence error and retrieval precision-recall.
Ties in descriptor distance are always broken toward the lower index.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from app.core.errors import DimensionError
from app.db.cache import atomic_write_text
from app.models.curves import Curve, CurveKind
from app.models.mesh import Mesh
from app.services.fast_marching import fast_marching
from app.services.layers import cov_forward
from app.services.mesh_ops import geodesic_diameter

logger = logging.getLogger(__name__)

PRINCETON_POINTS = 101
RECALL_LEVELS = 11


def match_ranks(query_desc: np.ndarray, ref_desc: np.ndarray, ground_truth: np.ndarray) -> np.ndarray:
    """1-based rank of each query's true match among the reference descriptors."""
    query_desc = np.atleast_2d(query_desc)
    ref_desc = np.atleast_2d(ref_desc)
    ground_truth = np.asarray(ground_truth, dtype=np.int64)
    if len(ground_truth) != len(query_desc):
        raise DimensionError(f"{len(ground_truth)} ground-truth entries for {len(query_desc)} queries")
    if query_desc.shape[1] != ref_desc.shape[1]:
        raise DimensionError("query and reference descriptors differ in dimension")
    if np.any(ground_truth < 0) or np.any(ground_truth >= len(ref_desc)):
        raise ValueError("ground truth references a vertex outside the reference set")
    d = cdist(query_desc, ref_desc)
    rows = np.arange(len(query_desc))
    true = d[rows, ground_truth][:, None]
    columns = np.arange(len(ref_desc))[None, :]
    ahead = (d < true) | ((d == true) & (columns < ground_truth[:, None]))
    return ahead.sum(axis=1) + 1


def cmc(query_desc: np.ndarray, ref_desc: np.ndarray, ground_truth: np.ndarray, k_max: Optional[int] = None) -> Curve:
    """Fraction of queries whose true match is among the k nearest references, k = 1..k_max."""
    n_ref = len(np.atleast_2d(ref_desc))
    k_max = n_ref if k_max is None else k_max
    if not 1 <= k_max <= n_ref:
        raise ValueError(f"k_max must lie in [1, {n_ref}], got {k_max}")
    ranks = match_ranks(query_desc, ref_desc, ground_truth)
    ks = np.arange(1, k_max + 1)
    counts = np.bincount(np.minimum(ranks, k_max + 1), minlength=k_max + 2)[1 : k_max + 1]
    values = np.cumsum(counts) / len(ranks)
    return Curve(CurveKind.CMC, ks.astype(np.float64), values, {"queries": int(len(ranks)), "references": n_ref})


def roc(pos_dists: np.ndarray, neg_dists: np.ndarray, thresholds: Optional[np.ndarray] = None) -> Curve:
    """(FPR, TPR) at each threshold, closed with (0, 0) and (1, 1)."""
    pos = np.sort(np.asarray(pos_dists, dtype=np.float64).ravel())
    neg = np.sort(np.asarray(neg_dists, dtype=np.float64).ravel())
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("ROC needs positive and negative distances")
    if thresholds is None:
        thresholds = np.unique(np.concatenate((pos, neg)))
    thresholds = np.sort(np.asarray(thresholds, dtype=np.float64).ravel())
    tpr = np.searchsorted(pos, thresholds, side="right") / len(pos)
    fpr = np.searchsorted(neg, thresholds, side="right") / len(neg)
    fpr = np.concatenate(([0.0], fpr, [1.0]))
    tpr = np.concatenate(([0.0], tpr, [1.0]))
    return Curve(CurveKind.ROC, fpr, tpr, {"positives": int(len(pos)), "negatives": int(len(neg))})


def roc_auc(curve: Curve) -> float:
    if curve.kind is not CurveKind.ROC:
        raise ValueError(f"AUC is defined for ROC curves, got {curve.kind.value}")
    return float(np.trapezoid(curve.ordinate, curve.abscissa))


def pair_distances(desc_a: np.ndarray, desc_b: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows desc_a[pairs[:, 0]] and desc_b[pairs[:, 1]]."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    diff = np.atleast_2d(desc_a)[pairs[:, 0]] - np.atleast_2d(desc_b)[pairs[:, 1]]
    return np.sqrt(np.sum(diff * diff, axis=1))


def correspondence_errors(
    predicted: np.ndarray,
    ground_truth: np.ndarray,
    ref_mesh: Mesh,
    fields: Optional[Dict[int, np.ndarray]] = None,
) -> np.ndarray:
    """Geodesic distance on the reference between each predicted and true vertex."""
    predicted = np.asarray(predicted, dtype=np.int64)
    ground_truth = np.asarray(ground_truth, dtype=np.int64)
    if predicted.shape != ground_truth.shape:
        raise DimensionError(f"{len(predicted)} predictions for {len(ground_truth)} ground-truth entries")
    fields = {} if fields is None else fields
    errors = np.empty(len(predicted))
    for i, (p, t) in enumerate(zip(predicted.tolist(), ground_truth.tolist())):
        if t not in fields:
            fields[t] = fast_marching(ref_mesh, t, math.inf).distances
        errors[i] = fields[t][p]
    return errors


def princeton(
    predicted: np.ndarray,
    ground_truth: np.ndarray,
    ref_mesh: Mesh,
    r_max: float = 0.25,
    diameter: Optional[float] = None,
    n_points: int = PRINCETON_POINTS,
    diameter_samples: int = 16,
) -> Curve:
    """Fraction of queries with diameter-normalized geodesic error <= r, for r in [0, r_max]."""
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if diameter is None:
        diameter = geodesic_diameter(ref_mesh, diameter_samples)
    errors = correspondence_errors(predicted, ground_truth, ref_mesh) / diameter
    radii = np.linspace(0.0, r_max, n_points)
    sorted_errors = np.sort(errors)
    fractions = np.searchsorted(sorted_errors, radii, side="right") / len(errors)
    return Curve(
        CurveKind.PRINCETON, radii, fractions, {"queries": int(len(errors)), "diameter": float(diameter)}
    )


def rank_gallery(descriptors: np.ndarray) -> List[np.ndarray]:
    """Leave-one-out rankings: for each shape, all other shapes by ascending descriptor distance."""
    descriptors = np.atleast_2d(descriptors)
    d = cdist(descriptors, descriptors)
    rankings = []
    for q in range(len(descriptors)):
        others = np.delete(np.arange(len(descriptors)), q)
        order = np.argsort(d[q, others], kind="stable")
        rankings.append(others[order])
    return rankings


def precision_recall(
    rankings: Sequence[Sequence[int]],
    labels: Sequence[str],
    recall_levels: int = RECALL_LEVELS,
) -> Curve:
    """Interpolated precision at evenly spaced recall levels, averaged over queries.

    rankings[q] orders the gallery for query q; q itself is ignored if present.
    """
    labels = list(labels)
    if len(rankings) != len(labels):
        raise DimensionError(f"{len(rankings)} rankings for {len(labels)} labeled shapes")
    levels = np.linspace(0.0, 1.0, recall_levels)
    curves = []
    skipped = []
    for q, ranking in enumerate(rankings):
        gallery = [int(g) for g in ranking if int(g) != q]
        relevant = np.array([labels[g] == labels[q] for g in gallery], dtype=bool)
        total = int(relevant.sum())
        if total == 0:
            skipped.append(q)
            continue
        hits = np.cumsum(relevant)
        precision = hits / np.arange(1, len(gallery) + 1)
        recall = hits / total
        # interpolated: best precision at any recall >= level
        curves.append([precision[recall >= level - 1e-12].max() for level in levels])
    if skipped:
        logger.warning("Skipped %d queries whose class has a single member: %s", len(skipped), skipped)
    if not curves:
        raise ValueError("no query has another member of its class")
    return Curve(
        CurveKind.PR, levels, np.mean(curves, axis=0), {"queries": len(curves), "skipped": len(skipped)}
    )


def descriptor_distance_map(values: np.ndarray, vertex: int) -> np.ndarray:
    """Euclidean descriptor distance from one vertex to all others, divided by the median and saturated at 1."""
    values = np.atleast_2d(values)
    d = np.sqrt(np.sum((values - values[vertex]) ** 2, axis=1))
    median = float(np.median(d))
    if median <= 0.0:
        return (d > 0.0).astype(np.float64)
    return np.minimum(d / median, 1.0)


def covariance_descriptor(values: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """Area-weighted covariance of a raw descriptor field, column-stacked."""
    vector, _ = cov_forward(np.atleast_2d(np.asarray(values, dtype=np.float64)), areas)
    return vector


def format_curve_csv(curve: Curve) -> str:
    x_name, y_name = curve.header
    lines = [f"{x_name},{y_name}"]
    for x, y in curve.points:
        x_text = str(int(x)) if curve.kind is CurveKind.CMC else repr(float(x))
        lines.append(f"{x_text},{float(y)!r}")
    return "\n".join(lines) + "\n"


def write_curve_csv(curve: Curve, path: Union[str, Path]) -> Path:
    path = Path(path)
    atomic_write_text(path, format_curve_csv(curve))
    logger.info("Wrote %s curve (%d points) to %s", curve.kind.value, len(curve.abscissa), path)
    return path
