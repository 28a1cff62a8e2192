"""
On-the-fly positive / negative pair sampling.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import InsufficientDataError
from app.models.learning import PairSet, ShapeSample
from app.services.fast_marching import fast_marching

logger = logging.getLogger(__name__)

# Draws per requested pair before giving up
MAX_ATTEMPTS_PER_PAIR = 50


class NearMissOracle:
    """Memoized geodesic neighborhoods: is a vertex within radius of a center on a shape?"""

    def __init__(self, samples: Sequence[ShapeSample], radius_factor: float = 2.0):
        self.samples = samples
        self.radius_factor = radius_factor
        self._fields: Dict[Tuple[int, int], np.ndarray] = {}

    def distances(self, shape: int, center: int) -> np.ndarray:
        key = (shape, center)
        if key not in self._fields:
            sample = self.samples[shape]
            self._fields[key] = fast_marching(sample.mesh, center, self.radius_factor * sample.rho0).distances
        return self._fields[key]

    def is_near(self, shape: int, center: int, vertex: int) -> bool:
        return bool(self.distances(shape, center)[vertex] < self.radius_factor * self.samples[shape].rho0)


def _inverse_ground_truth(sample: ShapeSample) -> Dict[int, int]:
    """Reference vertex -> lowest shape vertex mapped onto it."""
    inverse: Dict[int, int] = {}
    for vertex, ref in enumerate(sample.ground_truth.tolist()):
        inverse.setdefault(int(ref), vertex)
    return inverse


def sample_pairs(
    samples: Sequence[ShapeSample],
    count_pos: int,
    count_neg: int,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    oracle: Optional[NearMissOracle] = None,
) -> PairSet:
    """Vertex pairs across shapes with ground truth.

    Negatives whose second vertex lies within 2 rho0 of the true correspondent are rejected.
    """
    usable = [i for i, s in enumerate(samples) if s.ground_truth is not None]
    if len(usable) < 2:
        raise InsufficientDataError(
            f"pair sampling needs at least 2 shapes with ground truth, got {len(usable)}",
            hint="add ground_truth files to the dataset shapes",
        )
    rng = rng if rng is not None else np.random.default_rng(seed)
    oracle = oracle if oracle is not None else NearMissOracle(samples)
    inverses = {i: _inverse_ground_truth(samples[i]) for i in usable}

    def draw_shapes() -> Tuple[int, int]:
        a, b = rng.choice(len(usable), size=2, replace=False)
        return usable[int(a)], usable[int(b)]

    positives: List[Tuple[int, int, int, int]] = []
    seen = set()
    attempts = 0
    while len(positives) < count_pos:
        attempts += 1
        if attempts > MAX_ATTEMPTS_PER_PAIR * max(count_pos, 1):
            raise InsufficientDataError(f"could only sample {len(positives)} of {count_pos} positive pairs")
        a, b = draw_shapes()
        va = int(rng.integers(samples[a].n_vertices))
        vb = inverses[b].get(int(samples[a].ground_truth[va]))
        if vb is None or (a, va, b, vb) in seen:
            continue
        seen.add((a, va, b, vb))
        positives.append((a, va, b, vb))

    negatives: List[Tuple[int, int, int, int]] = []
    attempts = 0
    while len(negatives) < count_neg:
        attempts += 1
        if attempts > MAX_ATTEMPTS_PER_PAIR * max(count_neg, 1):
            raise InsufficientDataError(f"could only sample {len(negatives)} of {count_neg} negative pairs")
        a, b = draw_shapes()
        va = int(rng.integers(samples[a].n_vertices))
        vb = int(rng.integers(samples[b].n_vertices))
        if (a, va, b, vb) in seen:
            continue
        match = inverses[b].get(int(samples[a].ground_truth[va]))
        if match is not None and oracle.is_near(b, match, vb):
            continue
        seen.add((a, va, b, vb))
        negatives.append((a, va, b, vb))

    return PairSet(
        positives=np.array(positives, dtype=np.int64).reshape(-1, 4),
        negatives=np.array(negatives, dtype=np.int64).reshape(-1, 4),
    )


def sample_shape_pairs(
    labels: Sequence[Optional[str]],
    count_pos: int,
    count_neg: int,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> PairSet:
    """Whole-shape pairs: positives share a class label, negatives do not."""
    labeled = [i for i, label in enumerate(labels) if label is not None]
    same = [(a, b) for a in labeled for b in labeled if a < b and labels[a] == labels[b]]
    different = [(a, b) for a in labeled for b in labeled if a < b and labels[a] != labels[b]]
    if not same or not different:
        raise InsufficientDataError(
            f"retrieval pairs need two shapes of one class and two classes; "
            f"found {len(same)} same-class and {len(different)} cross-class pairs"
        )
    rng = rng if rng is not None else np.random.default_rng(seed)

    def pick(pool, count):
        chosen = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
        return np.array([(pool[c][0], -1, pool[c][1], -1) for c in sorted(chosen.tolist())], dtype=np.int64)

    return PairSet(positives=pick(same, count_pos).reshape(-1, 4), negatives=pick(different, count_neg).reshape(-1, 4))
