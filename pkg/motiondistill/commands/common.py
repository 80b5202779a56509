"""Helpers shared by the sub-commands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from motiondistill.config import ExperimentConfig
from motiondistill.errors import UsageError
from motiondistill.models.records import Provenance
from motiondistill.motion.types import MotionCorpus
from motiondistill.settings import get_settings
from motiondistill.storage.checkpoints import Checkpoint, load_checkpoint
from motiondistill.storage.datasets import read_split

logger = logging.getLogger("motiondistill.cli")


def add_config_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="experiment YAML (default: repository config.yaml)")


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.load(getattr(args, "config", None)).with_seed(args.seed)
    logger.debug("Config %s (hash %s)", getattr(args, "config", None) or "config.yaml", config.config_hash()[:12])
    return config


def print_config(document: dict[str, Any], args: argparse.Namespace) -> int:
    """Echo the resolved configuration and command parameters as YAML."""
    params = {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items() if k != "handler"}
    sys.stdout.write(yaml.safe_dump({"command": params, "config": document}, sort_keys=False))
    return 0


def provenance(config: ExperimentConfig, command: str) -> Provenance:
    return Provenance(seed=config.seed, config_hash=config.config_hash(), command=command)


def command_rng(config: ExperimentConfig, stream: int) -> np.random.Generator:
    """Independent generator per command so stages do not share random streams."""
    return np.random.default_rng([config.seed, stream])


def progress_enabled() -> bool:
    return get_settings().progress


def read_data(directory: Path | None, split: str) -> MotionCorpus:
    if directory is None:
        raise UsageError("--data is required for this command")
    return read_split(directory, split)


def require_mode(ckpt: Checkpoint, path: Path, *modes: str) -> Checkpoint:
    if ckpt.mode not in modes:
        raise UsageError(f"{path} holds a {ckpt.mode} model; expected one of {', '.join(modes)}")
    return ckpt


def load_model(path: Path, *modes: str) -> Checkpoint:
    ckpt = load_checkpoint(path)
    return require_mode(ckpt, path, *modes) if modes else ckpt


def emit(payload: dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
