"""Model checkpoints: parameter segments plus everything needed to rebuild the predictor."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from motiondistill.errors import DataFormatError
from motiondistill.models.records import EpochRecord, Provenance
from motiondistill.networks.base import DenoiserModel
from motiondistill.networks.registry import restore_model
from motiondistill.services.diffusion import make_plan, make_schedule
from motiondistill.services.predictors import DirectPredictor, MultiStepPredictor, OneStepPredictor, Predictor
from motiondistill.storage.container import Container, read_container, write_container

logger = logging.getLogger("motiondistill.storage")

CHECKPOINT_MAGIC = b"MDCK"
CHECKPOINT_VERSION = 1

PredictorMode = Literal["multi_step", "one_step", "direct"]


@dataclass
class Checkpoint:
    model: DenoiserModel
    mode: PredictorMode
    H: int
    F: int
    provenance: Provenance
    schedule: dict[str, Any] = field(default_factory=dict)  # steps, kind
    sampler_steps: int | None = None  # multi-step plans only
    step: int | None = None  # pinned step of a one-step teacher copy
    history: list[EpochRecord] = field(default_factory=list)
    experiment: dict[str, Any] = field(default_factory=dict)

    def predictor(self, n_steps: int | None = None, value_bound: float | None = None) -> Predictor:
        """The sampling map this checkpoint was trained for; ``n_steps`` overrides the plan length.

        ``value_bound`` enables the divergence check of multi-step sampling.
        """
        if self.mode == "multi_step":
            schedule = make_schedule(self.schedule["steps"], self.schedule["kind"])
            plan = make_plan(schedule, n_steps or self.sampler_steps or schedule.K)
            return MultiStepPredictor(self.model, schedule, plan, self.H, self.F, value_bound)
        if self.mode == "one_step":
            return OneStepPredictor(self.model, self.H, self.F, step=self.step)
        return DirectPredictor(self.model, self.H, self.F)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    state = ckpt.model.state_dict()
    names = sorted(state)
    segments, offset = [], 0
    for name in names:
        segments.append({"name": name, "shape": list(state[name].shape), "offset": offset})
        offset += state[name].size
    payload = np.concatenate([state[n].reshape(-1) for n in names]) if names else np.zeros(0)
    footer = {
        "kind": ckpt.model.kind,
        "mode": ckpt.mode,
        "config": ckpt.model.config.model_dump(mode="json"),
        "segments": segments,
        "H": ckpt.H,
        "F": ckpt.F,
        "schedule": ckpt.schedule,
        "sampler_steps": ckpt.sampler_steps,
        "step": ckpt.step,
        "provenance": ckpt.provenance.model_dump(mode="json"),
        "history": [r.model_dump(mode="json") for r in ckpt.history],
        "experiment": ckpt.experiment,
    }
    write_container(path, Container(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, (len(segments),), payload, footer))
    logger.info("Saved %s checkpoint (%s, %d parameters) to %s", ckpt.model.kind, ckpt.mode, payload.size, path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    container = read_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    footer = container.footer
    try:
        kind, mode, config = footer["kind"], footer["mode"], footer["config"]
        H, F = int(footer["H"]), int(footer["F"])
        prov = Provenance.model_validate(footer["provenance"])
        history = [EpochRecord.model_validate(r) for r in footer.get("history", [])]
        segments = [(str(s["name"]), [int(d) for d in s["shape"]], int(s["offset"])) for s in footer["segments"]]
    except KeyError as exc:
        raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, f"footer lacks {exc}", str(path)) from None
    except (TypeError, ValueError) as exc:
        # pydantic ValidationError is a ValueError
        raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, f"malformed footer: {exc}", str(path)) from None
    if container.dims != (len(segments),):
        raise DataFormatError(
            DataFormatError.HEADER_INCONSISTENT,
            f"header declares {container.dims} segments, footer lists {len(segments)}",
            str(path),
        )

    state: dict[str, np.ndarray] = {}
    end = 0
    for name, shape, start in segments:
        size = int(np.prod(shape, dtype=np.int64))
        end = start + size
        if start < 0 or end > container.payload.size:
            raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, f"segment {name} overruns payload", str(path))
        state[name] = container.payload[start:end].reshape(shape).copy()
    if end != container.payload.size:
        raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, "payload size differs from segment total", str(path))

    return Checkpoint(
        model=restore_model(kind, config, state),
        mode=mode,
        H=H,
        F=F,
        provenance=prov,
        schedule=footer.get("schedule") or {},
        sampler_steps=footer.get("sampler_steps"),
        step=footer.get("step"),
        history=history,
        experiment=footer.get("experiment") or {},
    )
