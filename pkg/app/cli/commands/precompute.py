"""
precompute: eigensystem, geometry vectors, HKS and patch operator for every dataset shape.
"""
import json
import logging
from pathlib import Path

from app.core.errors import GCNNError
from app.schemas.experiment import ExperimentConfig
from app.services.cache_storage import CacheStorage
from app.services.precompute import precompute_all

logger = logging.getLogger(__name__)


def register(subparsers, common) -> None:
    parser = subparsers.add_parser("precompute", parents=[common], help="fill the per-shape cache")
    parser.set_defaults(handler=run)


def run(args, config: ExperimentConfig) -> int:
    storage = CacheStorage(Path(config.output_dir))
    report = precompute_all(config, storage)
    print(json.dumps(report.to_dict()))
    if report.failed:
        raise GCNNError(
            f"{len(report.failed)} of {len(config.dataset.shapes)} shapes failed: {sorted(report.failed)}",
            hint="see the log for per-shape errors",
        )
    return 0
