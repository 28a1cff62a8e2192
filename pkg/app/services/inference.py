"""
Running a trained model on cached shapes and exporting what it produces.
"""
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from app.db import cache
from app.models.learning import ShapeSample
from app.models.network import Model
from app.models.spectral import DescriptorField, Provenance
from app.services.evaluation import covariance_descriptor
from app.services.network import model_forward

logger = logging.getLogger(__name__)


def shape_output(model: Model, sample: ShapeSample) -> np.ndarray:
    """Model output on one shape: (N, Q) descriptors, (N, N') probabilities or a (1, P*P) global row."""
    bound = model.bind(sample.patch_operator, sample.areas)
    out, _ = model_forward(bound, sample.features)
    return out


def global_descriptor(model: Model, sample: ShapeSample) -> np.ndarray:
    """Whole-shape descriptor: the COV head output, or the covariance of the point-wise output."""
    out = shape_output(model, sample)
    if model.has_cov_head:
        return out[0]
    return covariance_descriptor(out, sample.areas)


def nearest_matches(query_desc: np.ndarray, ref_desc: np.ndarray) -> np.ndarray:
    """Index of the closest reference descriptor per query; ties go to the lower index."""
    return np.argmin(cdist(np.atleast_2d(query_desc), np.atleast_2d(ref_desc)), axis=1)


def soft_matches(probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Most probable reference vertex and its probability, per row."""
    best = np.argmax(probs, axis=1)
    return best, probs[np.arange(len(probs)), best]


def predicted_matches(model: Model, output: np.ndarray, ref_output: np.ndarray) -> np.ndarray:
    if model.has_softmax_head:
        return soft_matches(output)[0]
    return nearest_matches(output, ref_output)


def format_correspondence_csv(probs: np.ndarray) -> str:
    best, prob = soft_matches(probs)
    lines = ["vertex,reference_vertex,probability"]
    lines += [f"{i},{int(j)},{float(p)!r}" for i, (j, p) in enumerate(zip(best, prob))]
    return "\n".join(lines) + "\n"


def format_distance_map_csv(distances: np.ndarray) -> str:
    lines = ["vertex,distance"] + [f"{i},{float(d)!r}" for i, d in enumerate(distances)]
    return "\n".join(lines) + "\n"


def write_descriptors(path: Union[str, Path], values: np.ndarray, shape: str) -> Path:
    field = DescriptorField(np.atleast_2d(values), Provenance.NET)
    record = cache.dense_record(field.values, {"provenance": field.provenance.value, "shape": shape})
    return cache.write_record(path, record)


def read_descriptors(path: Union[str, Path]) -> DescriptorField:
    record = cache.read_record(path)
    provenance = Provenance(record.metadata.get("provenance", Provenance.NET.value))
    return DescriptorField(cache.read_dense(record), provenance)
