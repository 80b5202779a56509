"""Batch-synchronous optimisation loop and a reference test function."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from motiondistill.bayesopt.acquisition import SuggestSettings, Suggester
from motiondistill.bayesopt.space import ContinuousDimension, SearchSpace
from motiondistill.models.records import TrialRecord

logger = logging.getLogger("motiondistill.bayesopt")

BRANIN_MINIMUM = 0.397887


def propose_round(suggester: Suggester, history: Sequence[TrialRecord], parallel: int, seed: int) -> list[TrialRecord]:
    """``parallel`` pending trials, each suggested with the earlier ones already pending."""
    batch: list[TrialRecord] = []
    for _ in range(parallel):
        u = suggester.suggest([*history, *batch])
        batch.append(
            TrialRecord(
                trial_id=len(history) + len(batch),
                status="pending",
                lam_raw=suggester.space.decode(u),
                lam_encoded=[float(v) for v in u],
                seed=seed,
            )
        )
    return batch


def minimize(
    fn: Callable[[dict[str, float]], float],
    space: SearchSpace,
    rounds: int,
    parallel: int = 5,
    settings: SuggestSettings | None = None,
    seed: int = 0,
) -> list[TrialRecord]:
    """In-memory loop: each round proposes ``parallel`` points, then evaluates them."""
    suggester = Suggester(space, settings, seed)
    history: list[TrialRecord] = []
    for r in range(rounds):
        for trial in propose_round(suggester, history, parallel, seed):
            g = float(fn(trial.lam_raw))
            history.append(trial.model_copy(update={"status": "done", "g": g}))
        logger.debug("round %d best %.6g", r, min(t.g for t in history))
    return history


def branin(params: dict[str, float]) -> float:
    x1, x2 = params["x1"], params["x2"]
    a, b, c = 1.0, 5.1 / (4 * math.pi**2), 5.0 / math.pi
    r, s, t = 6.0, 10.0, 1.0 / (8 * math.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * math.cos(x1) + s


def branin_space() -> SearchSpace:
    return SearchSpace([ContinuousDimension("x1", -5.0, 10.0), ContinuousDimension("x2", 0.0, 15.0)])


def branin_grid_minimum(n: int = 1000) -> float:
    x1 = np.linspace(-5.0, 10.0, n)[:, None]
    x2 = np.linspace(0.0, 15.0, n)[None, :]
    b, c, t = 5.1 / (4 * math.pi**2), 5.0 / math.pi, 1.0 / (8 * math.pi)
    values = (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1 - t) * np.cos(x1) + 10.0
    return float(values.min())
