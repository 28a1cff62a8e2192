"""
eval: CMC, ROC, Princeton or precision-recall curves for a checkpoint or a raw descriptor.
"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from app.core import paths
from app.core.errors import ConfigError, InsufficientDataError
from app.models.curves import Curve, CurveKind
from app.models.learning import ShapeSample
from app.models.network import Model
from app.schemas.experiment import ExperimentConfig, InputKind, Split
from app.services import evaluation
from app.services.cache_storage import CacheStorage, load_model
from app.services.dataset import load_sample, load_samples, reference_entry
from app.services.inference import global_descriptor, nearest_matches, predicted_matches, shape_output

logger = logging.getLogger(__name__)


def register(subparsers, common) -> None:
    parser = subparsers.add_parser("eval", parents=[common], help="write an evaluation curve CSV")
    parser.add_argument("--kind", required=True, choices=[k.value for k in CurveKind])
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--checkpoint", help="checkpoint path (default: <output_dir>/checkpoints/model.gcnn)")
    source.add_argument("--raw", choices=[k.value for k in InputKind], help="evaluate a cached raw descriptor")
    parser.add_argument("--split", default=Split.TEST.value, choices=[s.value for s in Split])
    parser.add_argument("--r-max", dest="r_max", type=float, default=0.25, help="Princeton error range")
    parser.add_argument("--k-max", dest="k_max", type=int, help="CMC rank range (default: all)")
    parser.add_argument("--out", help="CSV path (default: <output_dir>/eval/<kind>.csv)")
    parser.set_defaults(handler=run)


class _Source:
    """Descriptors from either a model or a cached raw field."""

    def __init__(self, model: Optional[Model]):
        self.model = model

    def point(self, sample: ShapeSample) -> np.ndarray:
        return sample.features if self.model is None else shape_output(self.model, sample)

    def shape(self, sample: ShapeSample) -> np.ndarray:
        if self.model is None:
            return evaluation.covariance_descriptor(sample.features, sample.areas)
        return global_descriptor(self.model, sample)

    def matches(self, output: np.ndarray, ref_output: np.ndarray) -> np.ndarray:
        if self.model is None:
            return nearest_matches(output, ref_output)
        return predicted_matches(self.model, output, ref_output)


def _queries(config: ExperimentConfig, storage: CacheStorage, split: Split):
    ref_entry = reference_entry(config)
    reference = load_sample(ref_entry, storage, config.model.input)
    queries = [
        s
        for s in load_samples(config, storage, [split])
        if s.name != ref_entry.name and s.ground_truth is not None
    ]
    if not queries:
        raise InsufficientDataError(
            f"no shapes with ground truth in split {split.value!r} besides the reference {ref_entry.name!r}"
        )
    return reference, queries


def _stacked(source: _Source, reference: ShapeSample, queries: List[ShapeSample]) -> Tuple[np.ndarray, ...]:
    ref_desc = source.point(reference)
    query_desc = np.concatenate([source.point(q) for q in queries])
    gt = np.concatenate([q.ground_truth for q in queries])
    return ref_desc, query_desc, gt


def _roc_pairs(gt: np.ndarray, n_ref: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Positive pair per query with its true match, negative pair with a random other reference vertex."""
    queries = np.arange(len(gt))
    positives = np.column_stack((queries, gt))
    rng = np.random.default_rng(seed)
    offsets = rng.integers(1, n_ref, size=len(gt))
    negatives = np.column_stack((queries, (gt + offsets) % n_ref))
    return positives, negatives


def curve_for(kind: CurveKind, args, config: ExperimentConfig, storage: CacheStorage, source: _Source) -> Curve:
    split = Split(args.split)

    if kind is CurveKind.PR:
        samples = load_samples(config, storage, [split])
        labeled = [s for s in samples if s.label is not None]
        if len(labeled) < 2:
            raise InsufficientDataError(f"precision-recall needs at least two labeled shapes in split {split.value!r}")
        descriptors = np.stack([source.shape(s) for s in labeled])
        return evaluation.precision_recall(evaluation.rank_gallery(descriptors), [s.label for s in labeled])

    reference, queries = _queries(config, storage, split)
    ref_desc, query_desc, gt = _stacked(source, reference, queries)

    if kind is CurveKind.CMC:
        return evaluation.cmc(query_desc, ref_desc, gt, args.k_max)
    if kind is CurveKind.ROC:
        if len(ref_desc) < 2:
            raise InsufficientDataError("ROC needs a reference with at least two vertices")
        positives, negatives = _roc_pairs(gt, len(ref_desc), config.seed)
        curve = evaluation.roc(
            evaluation.pair_distances(query_desc, ref_desc, positives),
            evaluation.pair_distances(query_desc, ref_desc, negatives),
        )
        logger.info("ROC AUC %.4f", evaluation.roc_auc(curve))
        return curve

    # Princeton: reference geodesics in normalized units
    manifest = storage.require_manifest(reference.name)
    diameter = float(manifest["diameter"]) * float(manifest.get("scale", 1.0))
    predicted = source.matches(query_desc, ref_desc)
    return evaluation.princeton(predicted, gt, reference.mesh, r_max=args.r_max, diameter=diameter)


def run(args, config: ExperimentConfig) -> int:
    output_dir = Path(config.output_dir)
    storage = CacheStorage(output_dir)
    kind = CurveKind(args.kind)
    if args.r_max <= 0:
        raise ConfigError("--r-max must be positive")

    if args.raw:
        source = _Source(None)
        model_cfg = config.model.model_copy(update={"input": InputKind(args.raw)})
        config = config.model_copy(update={"model": model_cfg})
    else:
        source = _Source(load_model(Path(args.checkpoint) if args.checkpoint else paths.checkpoint_path(output_dir)))

    try:
        curve = curve_for(kind, args, config, storage, source)
    except ValueError as e:
        raise ConfigError(f"{kind.value}: {e}")
    out = Path(args.out) if args.out else output_dir / paths.EVAL_SUBDIR / f"{kind.value}.csv"
    evaluation.write_curve_csv(curve, out)
    print(json.dumps({"kind": kind.value, "written": str(out), **curve.metadata}))
    return 0
