"""
Command router: shared flags, config overrides and error reporting for every sub-command.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from app.cli.commands import apply, evaluate, precompute, train
from app.core.config import load_config
from app.core.errors import ConfigError, ExternalIOError, GCNNError, InvalidValueError
from app.schemas.experiment import ExperimentConfig

logger = logging.getLogger(__name__)

COMMANDS = (precompute, train, apply, evaluate)
PRESET_CHOICES = ("gcnn1", "gcnn2", "gcnn3", "retrieval")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file (default: GCNN_CONFIG or metadata/config.json)")
    common.add_argument("--seed", type=int, help="override the experiment seed")
    common.add_argument("--threads", type=int, help="worker threads for chart computation")
    common.add_argument("--preset", choices=PRESET_CHOICES, help="architecture preset")
    common.add_argument("--max-updates", type=int, dest="max_updates", help="override train.max_updates")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcnn", description="Geodesic convolutional networks on triangle meshes")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    for command in COMMANDS:
        command.register(subparsers, common)
    return parser


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    """Command line flags win over the experiment file."""
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        train_cfg = config.train.model_copy(update={"seed": args.seed})
        config = config.model_copy(update={"seed": args.seed, "train": train_cfg})
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        config = config.model_copy(update={"threads": args.threads})
    if args.preset is not None:
        model_cfg = config.model.model_copy(update={"preset": args.preset, "layers": None})
        config = config.model_copy(update={"model": model_cfg})
    if args.max_updates is not None:
        if args.max_updates < 0:
            raise ConfigError("--max-updates must be nonnegative")
        train_cfg = config.train.model_copy(update={"max_updates": args.max_updates})
        config = config.model_copy(update={"train": train_cfg})
    return config


def report_error(error: GCNNError) -> int:
    print(json.dumps(error.to_dict()), file=sys.stderr)
    return EXIT_USAGE if isinstance(error, ConfigError) else EXIT_RUNTIME


def dispatch(argv: Optional[List[str]] = None, parser: Optional[argparse.ArgumentParser] = None) -> int:
    parser = parser or build_parser()
    args = parser.parse_args(argv)
    try:
        if args.log_level:
            level = args.log_level.upper()
            if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
                raise ConfigError(f"unknown log level {args.log_level!r}")
            logging.getLogger().setLevel(level)
        config = apply_overrides(load_config(args.config), args)
        return args.handler(args, config)
    except GCNNError as e:
        logger.error("%s failed: %s", args.command, e.message)
        return report_error(e)
    except OSError as e:
        logger.exception("%s failed on file access", args.command)
        return report_error(ExternalIOError(str(e)))
    except ValueError as e:
        logger.exception("%s failed", args.command)
        return report_error(InvalidValueError(str(e)))
