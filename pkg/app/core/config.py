import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv
from pydantic import ValidationError

from app.core.errors import ConfigError
from app.core.paths import BASE_DIR, CONFIG_PATH
from app.schemas.experiment import ExperimentConfig

load_dotenv()

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("GCNN_LOG_LEVEL", "INFO").upper()


def default_config_path() -> Path:
    return Path(os.getenv("GCNN_CONFIG", str(CONFIG_PATH)))


def load_config_dict(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        logger.error("Config file not found: %s", path)
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        logger.error("Invalid JSON in config file: %s", e)
        raise ConfigError(f"invalid JSON in {path}: {e}")


def load_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Load and validate an experiment file; environment keys fill in unset values."""
    path = Path(path) if path is not None else default_config_path()
    raw = load_config_dict(path)
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config {path}: {e}")

    updates: Dict[str, Any] = {}
    if "threads" not in raw and os.getenv("GCNN_THREADS"):
        updates["threads"] = int(os.environ["GCNN_THREADS"])
    if "output_dir" not in raw and os.getenv("GCNN_OUTPUT_DIR"):
        updates["output_dir"] = os.environ["GCNN_OUTPUT_DIR"]
    if updates:
        config = config.model_copy(update=updates)

    # Relative dataset paths are resolved against the config file location
    base = path.resolve().parent
    shapes = [
        s.model_copy(
            update={
                "mesh": _resolve(base, s.mesh),
                "ground_truth": _resolve(base, s.ground_truth) if s.ground_truth else None,
            }
        )
        for s in config.dataset.shapes
    ]
    dataset = config.dataset.model_copy(update={"shapes": shapes})
    output_dir = config.output_dir
    if not Path(output_dir).is_absolute():
        output_dir = str(BASE_DIR / output_dir) if path.resolve() == CONFIG_PATH else str(base / output_dir)
    return config.model_copy(update={"dataset": dataset, "output_dir": output_dir})


def _resolve(base: Path, value: str) -> str:
    p = Path(value)
    return str(p if p.is_absolute() else (base / p))
