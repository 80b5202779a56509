"""Denoiser architecture registry."""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from motiondistill.config import StudentConfig, TeacherConfig
from motiondistill.errors import ConfigError
from motiondistill.networks.base import DenoiserModel
from motiondistill.networks.mixer import MixerDenoiser
from motiondistill.networks.transformer import TransformerDenoiser

logger = logging.getLogger("motiondistill.networks")

# Map architecture kind → model class
ARCHITECTURE_CLASSES: dict[str, type[DenoiserModel]] = {
    "transformer": TransformerDenoiser,
    "mixer": MixerDenoiser,
}

CONFIG_CLASSES: dict[str, type[TeacherConfig] | type[StudentConfig]] = {
    "transformer": TeacherConfig,
    "mixer": StudentConfig,
}


def model_class(kind: str) -> type[DenoiserModel]:
    try:
        return ARCHITECTURE_CLASSES[kind]
    except KeyError:
        raise ConfigError(f"unknown architecture {kind!r}; known: {sorted(ARCHITECTURE_CLASSES)}") from None


def build_model(
    kind: str,
    config: TeacherConfig | StudentConfig,
    rng: np.random.Generator | None = None,
) -> DenoiserModel:
    return model_class(kind)(config, rng=rng)


def restore_model(kind: str, config: dict[str, Any], state: dict[str, np.ndarray]) -> DenoiserModel:
    """Rebuild a model from a config echo and its parameter segments."""
    cls = model_class(kind)
    cfg = CONFIG_CLASSES[kind].model_validate(config)
    logger.debug("Restoring %s model (%d segments)", kind, len(state))
    return cls(cfg, state=state)
