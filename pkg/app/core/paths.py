from pathlib import Path

BASE_DIR = Path(__file__).resolve().parents[2]

METADATA_DIR = BASE_DIR / "metadata"

CONFIG_PATH = METADATA_DIR / "config.json"

CACHE_SUBDIR = "cache"
CHECKPOINT_SUBDIR = "checkpoints"
APPLY_SUBDIR = "apply"
EVAL_SUBDIR = "eval"

CHECKPOINT_NAME = "model.gcnn"
LOSS_CSV_NAME = "loss.csv"
LOCK_NAME = ".lock"

# Per-shape cache file names
EIGENSYSTEM_FILE = "eigensystem.gcnn"
GEOVEC_FILE = "geovec.gcnn"
HKS_FILE = "hks.gcnn"
PATCH_OPERATOR_FILE = "patch_operator.gcnn"
MANIFEST_FILE = "manifest.json"


def cache_dir(output_dir: Path) -> Path:
    return Path(output_dir) / CACHE_SUBDIR


def shape_cache_dir(output_dir: Path, shape_name: str) -> Path:
    return cache_dir(output_dir) / shape_name


def checkpoint_path(output_dir: Path) -> Path:
    return Path(output_dir) / CHECKPOINT_SUBDIR / CHECKPOINT_NAME
