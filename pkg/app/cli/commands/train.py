"""
train: fit a model on the cached training shapes and write the checkpoint and loss history.
"""
import logging
from pathlib import Path
from typing import List, Optional

from app.core import paths
from app.core.errors import ConfigError, InsufficientDataError
from app.db.cache import atomic_write_text
from app.models.learning import LossRecord, ShapeSample
from app.models.network import Model
from app.schemas.experiment import ExperimentConfig, Split, Task
from app.services.cache_storage import CacheStorage, save_model
from app.services.dataset import load_samples, reference_entry
from app.services.network import build_model, preset_architecture
from app.services.training import train

logger = logging.getLogger(__name__)


def register(subparsers, common) -> None:
    parser = subparsers.add_parser("train", parents=[common], help="train a model from cached shapes")
    parser.add_argument("--checkpoint", help="checkpoint path (default: <output_dir>/checkpoints/model.gcnn)")
    parser.set_defaults(handler=run)


def architecture(config: ExperimentConfig) -> List[str]:
    if config.model.layers is not None:
        return list(config.model.layers)
    try:
        return list(preset_architecture(config.model.preset))
    except ValueError as e:
        raise ConfigError(f"model: {e}")


def initial_model(config: ExperimentConfig, samples: List[ShapeSample], storage: CacheStorage) -> Model:
    """Freshly initialized model sized for the cached inputs and the reference shape."""
    n_reference: Optional[int] = None
    if config.train.task is Task.CORRESPONDENCE or "LINREF" in [t.strip().upper() for t in architecture(config)]:
        n_reference = int(storage.require_manifest(reference_entry(config).name)["n_vertices"])
    try:
        return build_model(
            architecture(config),
            input_dim=samples[0].features.shape[1],
            n_rho=config.charting.n_rho,
            n_theta=config.charting.n_theta,
            n_reference=n_reference,
            bias=config.model.bias,
            seed=config.seed,
        )
    except ValueError as e:
        raise ConfigError(f"model: {e}")


def format_loss_csv(history: List[LossRecord]) -> str:
    with_val = any(r.val_loss is not None for r in history)
    lines = ["step,loss,val_loss" if with_val else "step,loss"]
    for r in history:
        row = f"{r.step},{r.loss!r}"
        if with_val:
            row += "," + (repr(r.val_loss) if r.val_loss is not None else "")
        lines.append(row)
    return "\n".join(lines) + "\n"


def run(args, config: ExperimentConfig) -> int:
    output_dir = Path(config.output_dir)
    storage = CacheStorage(output_dir)
    train_samples = load_samples(config, storage, [Split.TRAIN])
    validation = load_samples(config, storage, [Split.VALIDATION])
    if not train_samples:
        raise InsufficientDataError("no training shapes", hint="list shapes with split 'train' in the dataset")
    model = initial_model(config, train_samples, storage)
    logger.info(
        "Training %s (%d parameters) for %s",
        "+".join(model.architecture),
        model.parameter_count,
        config.train.task.value,
    )
    result = train(model, config.train.task, train_samples, config.train, validation or None)

    checkpoint = Path(args.checkpoint) if args.checkpoint else paths.checkpoint_path(output_dir)
    with storage.lock():
        save_model(checkpoint, result.model, {"task": config.train.task.value, "updates": result.updates})
        loss_path = checkpoint.parent / paths.LOSS_CSV_NAME
        atomic_write_text(loss_path, format_loss_csv(result.history))
    logger.info("Wrote checkpoint %s and loss history %s", checkpoint, loss_path)
    return 0
