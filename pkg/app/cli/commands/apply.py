"""
apply: run a checkpoint on one cached shape.

Writes <output_dir>/apply/<shape>.descriptors.gcnn (DENSE record), or
<shape>.correspondence.csv for a softmax head, plus an optional descriptor
distance map CSV around one vertex.
"""
import json
import logging
from pathlib import Path

from app.core import paths
from app.core.errors import ConfigError
from app.db.cache import atomic_write_text
from app.schemas.experiment import ExperimentConfig, ShapeEntry
from app.services.cache_storage import CacheStorage, load_model
from app.services.dataset import load_sample
from app.services.evaluation import descriptor_distance_map
from app.services.inference import (
    format_correspondence_csv,
    format_distance_map_csv,
    shape_output,
    write_descriptors,
)
from app.services.network import build_model

logger = logging.getLogger(__name__)


def register(subparsers, common) -> None:
    parser = subparsers.add_parser("apply", parents=[common], help="apply a trained model to one shape")
    parser.add_argument("--shape", required=True, help="shape name from the dataset")
    parser.add_argument("--checkpoint", help="checkpoint path (default: <output_dir>/checkpoints/model.gcnn)")
    parser.add_argument(
        "--identity", action="store_true", help="skip the checkpoint and export the cached input features"
    )
    parser.add_argument(
        "--distance-map", dest="distance_map", type=int, metavar="VERTEX", help="also export a distance map CSV"
    )
    parser.set_defaults(handler=run)


def find_shape(config: ExperimentConfig, name: str) -> ShapeEntry:
    for entry in config.dataset.shapes:
        if entry.name == name:
            return entry
    raise ConfigError(f"unknown shape {name!r}", hint=f"known shapes: {[s.name for s in config.dataset.shapes]}")


def run(args, config: ExperimentConfig) -> int:
    output_dir = Path(config.output_dir)
    storage = CacheStorage(output_dir)
    entry = find_shape(config, args.shape)
    sample = load_sample(entry, storage, config.model.input)

    if args.identity:
        model = build_model([], sample.features.shape[1], config.charting.n_rho, config.charting.n_theta)
    else:
        model = load_model(Path(args.checkpoint) if args.checkpoint else paths.checkpoint_path(output_dir))
    output = shape_output(model, sample)

    target = output_dir / paths.APPLY_SUBDIR
    written = []
    if model.has_softmax_head:
        path = target / f"{entry.name}.correspondence.csv"
        atomic_write_text(path, format_correspondence_csv(output))
    else:
        path = write_descriptors(target / f"{entry.name}.descriptors.gcnn", output, entry.name)
    written.append(str(path))

    if args.distance_map is not None:
        vertex = args.distance_map
        if not 0 <= vertex < len(output):
            raise ConfigError(f"--distance-map vertex {vertex} outside [0, {len(output)})")
        path = target / f"{entry.name}.distance_{vertex}.csv"
        atomic_write_text(path, format_distance_map_csv(descriptor_distance_map(output, vertex)))
        written.append(str(path))

    logger.info("Applied %s to %s: output %s", "+".join(model.architecture) or "identity", entry.name, output.shape)
    print(json.dumps({"shape": entry.name, "written": written}))
    return 0
