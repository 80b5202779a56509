"""Expected improvement and batch suggestions with kriging-believer fantasies."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import norm, qmc

from motiondistill.bayesopt.gp import GPHyperparameters, GPModel, fit_hyperparameters, standardize
from motiondistill.bayesopt.space import SearchSpace
from motiondistill.errors import SearchExhaustedError
from motiondistill.models.records import TrialRecord

logger = logging.getLogger("motiondistill.bayesopt")

DUPLICATE_TOL = 1e-9
NUDGE = 1e-6
NUDGE_ATTEMPTS = 16
RANDOM_ATTEMPTS = 64


def expected_improvement(mu: np.ndarray | float, sigma: np.ndarray | float, g_best: float) -> np.ndarray:
    """EI for minimization; reduces to max(g_best − μ, 0) where σ = 0."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if (sigma < 0).any():
        raise ValueError("sigma must be non-negative")
    improvement = g_best - mu
    safe = np.where(sigma > 0, sigma, 1.0)
    z = improvement / safe
    ei = improvement * norm.cdf(z) + safe * norm.pdf(z)
    return np.where(sigma > 0, np.maximum(ei, 0.0), np.maximum(improvement, 0.0))


@dataclass(frozen=True)
class SuggestSettings:
    n_initial: int = 5
    candidates: int = 1024
    refine_starts: int = 8
    gp_restarts: int = 5


class Suggester:
    """Deterministic suggestion policy over a fixed search space.

    The first ``n_initial`` trials come from a scrambled Sobol sequence fixed by
    ``seed``. Later suggestions fit the GP to finished trials, impute pending
    ones at their posterior mean and maximize EI.
    """

    def __init__(self, space: SearchSpace, settings: SuggestSettings | None = None, seed: int = 0) -> None:
        self.space = space
        self.settings = settings or SuggestSettings()
        self.seed = seed
        m = max(0, math.ceil(math.log2(self.settings.n_initial)))
        sobol = qmc.Sobol(len(space), scramble=True, seed=seed)
        self.initial = np.array([space.snap(u) for u in sobol.random_base2(m)[: self.settings.n_initial]])
        self._hyper_cache: dict[tuple[int, ...], GPHyperparameters] = {}

    def suggest(self, history: Sequence[TrialRecord]) -> np.ndarray:
        taken = [np.asarray(t.lam_encoded) for t in history]
        done = [t for t in history if t.status == "done" and t.g is not None and math.isfinite(t.g)]
        pending = [np.asarray(t.lam_encoded) for t in history if t.status == "pending"]
        rng = np.random.default_rng([self.seed, len(history)])

        if len(history) < self.settings.n_initial or not done:
            index = min(len(history), self.settings.n_initial - 1)
            return self._deduplicate(self.initial[index], taken)

        X = np.array([t.lam_encoded for t in done])
        z, _, _ = standardize(np.array([t.g for t in done]))
        # one fit per set of finished trials; fantasies within a round reuse it
        key = tuple(t.trial_id for t in done)
        if key not in self._hyper_cache:
            fit_rng = np.random.default_rng([self.seed, len(done), 7])
            self._hyper_cache[key] = fit_hyperparameters(X, z, fit_rng, self.settings.gp_restarts)
        hyper = self._hyper_cache[key]
        gp = GPModel(X, z, hyper)
        z_best = float(z.min())
        if pending:
            believed, _ = gp.posterior(np.array(pending))
            gp = gp.condition_on(np.array(pending), believed)

        best = self._maximize(gp, z_best, rng)
        return self._deduplicate(self.space.snap(best), taken)

    def _maximize(self, gp: GPModel, z_best: float, rng: np.random.Generator) -> np.ndarray:
        dim = len(self.space)

        def neg_ei(u: np.ndarray) -> np.ndarray:
            mu, var = gp.posterior(np.atleast_2d(u))
            return -expected_improvement(mu, np.sqrt(var), z_best)

        m = max(0, math.ceil(math.log2(self.settings.candidates)))
        candidates = qmc.Sobol(dim, scramble=True, seed=rng).random_base2(m)[: self.settings.candidates]
        scores = neg_ei(candidates)
        order = np.argsort(scores, kind="stable")
        best_u, best_score = candidates[order[0]], float(scores[order[0]])

        for start in candidates[order[: self.settings.refine_starts]]:
            res = optimize.minimize(lambda u: float(neg_ei(u)[0]), start, method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim)
            if res.success and float(res.fun) < best_score:
                best_u, best_score = np.clip(res.x, 0.0, 1.0), float(res.fun)
        logger.debug("EI maximum %.4g at %s", -best_score, np.round(best_u, 4))
        return best_u

    def _deduplicate(self, u: np.ndarray, taken: list[np.ndarray]) -> np.ndarray:
        def is_taken(p: np.ndarray) -> bool:
            return any(np.max(np.abs(p - t)) <= DUPLICATE_TOL for t in taken)

        if not is_taken(u):
            return u
        if any(d.is_integer for d in self.space.dimensions):
            for candidate in self.space.integer_neighbours(u):
                if not is_taken(candidate):
                    logger.debug("Suggestion %s already evaluated; moved to %s", u, candidate)
                    return candidate
        if self.space.all_integer:
            raise SearchExhaustedError("every grid point of the search space has been evaluated")
        # continuous coordinates: growing nudges first, then fresh random points
        axes = [i for i, d in enumerate(self.space.dimensions) if not d.is_integer]
        for k in range(1, NUDGE_ATTEMPTS + 1):
            for axis in axes:
                for sign in (1.0, -1.0):
                    nudged = u.copy()
                    nudged[axis] = nudged[axis] + sign * k * NUDGE
                    if 0.0 <= nudged[axis] <= 1.0 and not is_taken(nudged):
                        logger.debug("Suggestion %s already evaluated; nudged to %s", u, nudged)
                        return nudged
        rng = np.random.default_rng([self.seed, len(taken), 11])
        for _ in range(RANDOM_ATTEMPTS):
            fresh = u.copy()
            fresh[axes] = rng.random(len(axes))
            if not is_taken(fresh):
                logger.debug("Suggestion %s already evaluated; redrawn as %s", u, fresh)
                return fresh
        raise SearchExhaustedError(
            f"no untaken point found near {u} after {NUDGE_ATTEMPTS} nudges and {RANDOM_ATTEMPTS} draws"
        )


def suggest(
    history: Sequence[TrialRecord],
    space: SearchSpace,
    settings: SuggestSettings | None = None,
    seed: int = 0,
) -> np.ndarray:
    return Suggester(space, settings, seed).suggest(history)
