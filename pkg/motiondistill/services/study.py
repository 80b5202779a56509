"""Ledger-backed hyperparameter study for the mixer student.

Each round suggests ``parallel`` points (later ones see the earlier ones as
pending), records them as pending, fits them concurrently in a thread pool and
then scores them one at a time in suggestion order, so latency measurements
never overlap with training load and the ledger order is deterministic.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Literal, Protocol

import numpy as np

from motiondistill.bayesopt.acquisition import SuggestSettings, Suggester
from motiondistill.bayesopt.loop import propose_round
from motiondistill.bayesopt.space import SearchSpace
from motiondistill.config import BayesOptSection, ExperimentConfig
from motiondistill.errors import MotionDistillError, UsageError
from motiondistill.models.records import ObjectiveComponents, TrialRecord
from motiondistill.motion.types import MotionCorpus
from motiondistill.networks.base import DenoiserModel
from motiondistill.services.benchmark import benchmark_predictor
from motiondistill.services.diffusion import NoiseSchedule
from motiondistill.services.distillation import DistillResult, run_stage2
from motiondistill.services.objectives import (
    ValidationSet,
    best_of_many_ade,
    make_validation_set,
    objective_case1,
    objective_case2,
    reference_outputs,
)
from motiondistill.services.predictors import Predictor
from motiondistill.storage.ledger import TrialLedger

logger = logging.getLogger("motiondistill.study")

Score = tuple[float, ObjectiveComponents | None]


class TrialObjective(Protocol):
    def fit(self, params: dict[str, float], seed: int) -> Any: ...

    def score(self, fitted: Any) -> Score: ...


@dataclass
class FunctionObjective:
    """Adapter for a plain function of the raw parameters."""

    fn: Callable[[dict[str, float]], float]

    def fit(self, params: dict[str, float], seed: int) -> dict[str, float]:
        return params

    def score(self, fitted: dict[str, float]) -> Score:
        return float(self.fn(fitted)), None


def trial_seed(study_seed: int, trial_id: int) -> int:
    return int(np.random.SeedSequence([study_seed, trial_id]).generate_state(1)[0])


class Study:
    def __init__(
        self,
        space: SearchSpace,
        section: BayesOptSection,
        ledger: TrialLedger,
        objective: TrialObjective,
        seed: int,
        config_hash: str,
    ) -> None:
        self.space = space
        self.section = section
        self.ledger = ledger
        self.objective = objective
        self.seed = seed
        self.config_hash = config_hash
        settings = SuggestSettings(
            n_initial=section.n_initial,
            candidates=section.candidates,
            refine_starts=section.refine_starts,
            gp_restarts=section.gp_restarts,
        )
        self.suggester = Suggester(space, settings, seed)

    @property
    def budget(self) -> int:
        return self.section.iterations * self.section.parallel

    def run(self, max_rounds: int | None = None) -> list[TrialRecord]:
        # 1. Resume from the ledger
        history = self.ledger.load()
        foreign = {r.config_hash for r in history} - {self.config_hash}
        if foreign:
            raise UsageError(f"ledger {self.ledger.path} belongs to a different configuration ({sorted(foreign)})")
        leftover = [r for r in history if r.status == "pending"]
        if history:
            logger.info("Resuming study: %d trials in ledger, %d left pending", len(history), len(leftover))
        if leftover:
            history = self._evaluate(history, leftover)

        # 2. Rounds until the evaluation budget is spent
        rounds = 0
        while len(history) < self.budget and (max_rounds is None or rounds < max_rounds):
            size = min(self.section.parallel, self.budget - len(history))
            batch = [
                r.model_copy(update={"seed": trial_seed(self.seed, r.trial_id), "config_hash": self.config_hash})
                for r in propose_round(self.suggester, history, size, self.seed)
            ]
            for record in batch:
                self.ledger.append(record)
            history = self._evaluate([*history, *batch], batch)
            rounds += 1
            done = [r.g for r in history if r.status == "done"]
            logger.info(
                "Round %d: %d/%d trials, best g %s",
                rounds, len(history), self.budget, f"{min(done):.6g}" if done else "n/a",
            )
        return history

    def best(self, history: list[TrialRecord]) -> TrialRecord | None:
        done = [r for r in history if r.status == "done"]
        return min(done, key=lambda r: r.g) if done else None

    def _evaluate(self, history: list[TrialRecord], batch: list[TrialRecord]) -> list[TrialRecord]:
        """Fit ``batch`` concurrently, score serially, commit results in suggestion order."""
        started = time.perf_counter()
        with ThreadPoolExecutor(max_workers=self.section.parallel) as pool:
            futures = [pool.submit(self.objective.fit, r.lam_raw, r.seed) for r in batch]
            fitted = []
            for record, future in zip(batch, futures):
                try:
                    fitted.append((future.result(), None))
                except (MotionDistillError, ArithmeticError, ValueError) as exc:
                    logger.exception("Trial %d failed while training", record.trial_id)
                    fitted.append((None, exc))

        results = {r.trial_id: r for r in history}
        for record, (value, error) in zip(batch, fitted):
            update: dict[str, Any] = {"wall_seconds": time.perf_counter() - started}
            if error is None:
                try:
                    g, components = self.objective.score(value)
                    if not math.isfinite(g):
                        raise ArithmeticError(f"objective is not finite: {g}")
                    update |= {"status": "done", "g": g, "components": components}
                except (MotionDistillError, ArithmeticError, ValueError) as exc:
                    logger.exception("Trial %d failed while scoring", record.trial_id)
                    error = exc
            if error is not None:
                update |= {"status": "failed", "error": f"{type(error).__name__}: {error}"}
            final = record.model_copy(update=update)
            self.ledger.append(final)
            results[final.trial_id] = final
            logger.info("Trial %d %s %s -> %s", final.trial_id, final.status, final.lam_raw, final.g)
        return [results[i] for i in sorted(results)]


class StudentTrial:
    """Trains a mixer student from (lr, n_layers, d_model) and scores it.

    The distillation teacher is always the one-step model. Case 2 compares
    against ``reference`` (one-step or multi-step), whose accuracy and
    latency are measured once.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        one_step_model: DenoiserModel,
        one_step: Predictor,
        reference: Predictor,
        schedule: NoiseSchedule,
        corpus: MotionCorpus,
        case: Literal[1, 2],
    ) -> None:
        self.config = config
        self.section = config.bayesopt
        self.one_step_model = one_step_model
        self.one_step = one_step
        self.reference = reference if case == 2 else one_step
        self.schedule = schedule
        self.corpus = corpus
        self.case = case

        self.validation: ValidationSet = make_validation_set(
            corpus, self.section.validation_size, one_step.L, config.seed, config.distill_stage2.batch_size
        )
        self.targets = reference_outputs(self.reference, self.validation)
        self.reference_acc: float | None = None
        self.reference_time: float | None = None
        if case == 2:
            self.reference_acc = best_of_many_ade(
                self.reference, self.validation.corpus, self.section.accuracy_samples, self.validation.seed
            )
            self.reference_time = benchmark_predictor(
                self.reference, self.validation.corpus.observations[0], self.section.timing_repeats
            ).mean_seconds
            logger.info("Reference accuracy %.5f, latency %.4g s", self.reference_acc, self.reference_time)

    def fit(self, params: dict[str, float], seed: int) -> DistillResult:
        student = self.config.student.model_copy(
            update={"n_layers": int(params["n_layers"]), "d_model": int(params["d_model"])}
        )
        run = self.config.distill_stage2.model_copy(
            update={
                "base_lr": float(params["lr"]),
                "epochs": self.section.trial_epochs,
                "samples_per_epoch": self.section.trial_samples_per_epoch,
            }
        )
        return run_stage2(self.one_step_model, student, self.schedule, self.corpus, run, np.random.default_rng(seed))

    def score(self, fitted: DistillResult) -> Score:
        if self.case == 1:
            return objective_case1(fitted.predictor, self.reference, self.validation, self.targets), None
        return objective_case2(
            fitted.predictor,
            self.reference,
            self.validation,
            weights=self.section.weights,
            samples=self.section.accuracy_samples,
            repeats=self.section.timing_repeats,
            teacher_outputs=self.targets,
            reference_acc=self.reference_acc,
            reference_time=self.reference_time,
        )
