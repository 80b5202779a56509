"""Gaussian-process surrogate with a Matérn 5/2 ARD kernel."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from motiondistill.bayesopt.kernels import matern52_matrix
from motiondistill.errors import GPFactorizationError

logger = logging.getLogger("motiondistill.bayesopt.gp")

JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
VARIANCE_FLOOR = -1e-9

# log-space bounds for the marginal-likelihood fit on standardized targets
LOG_VARIANCE_BOUNDS = (math.log(1e-2), math.log(1e2))
LOG_LENGTHSCALE_BOUNDS = (math.log(1e-2), math.log(1e1))
LOG_NOISE_BOUNDS = (math.log(1e-8), math.log(1e-1))
LENGTHSCALE_PRIOR = (math.log(0.3), 1.0)  # mean, std of log ℓ


@dataclass(frozen=True)
class GPHyperparameters:
    variance: float
    lengthscales: np.ndarray
    noise: float = 1e-6

    @classmethod
    def default(cls, dim: int) -> GPHyperparameters:
        return cls(variance=1.0, lengthscales=np.full(dim, 0.3), noise=1e-6)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[math.log(self.variance)], np.log(self.lengthscales), [math.log(self.noise)]])

    @classmethod
    def from_vector(cls, theta: np.ndarray) -> GPHyperparameters:
        theta = np.asarray(theta, dtype=np.float64)
        return cls(variance=float(np.exp(theta[0])), lengthscales=np.exp(theta[1:-1]), noise=float(np.exp(theta[-1])))

    def scaled(self, factor: float) -> GPHyperparameters:
        """Same kernel shape for targets multiplied by ``sqrt(factor)``."""
        return GPHyperparameters(self.variance * factor, self.lengthscales, self.noise * factor)


def _factorize(K: np.ndarray) -> tuple[tuple[np.ndarray, bool], float]:
    eye = np.eye(len(K))
    for jitter in JITTERS:
        try:
            return linalg.cho_factor(K + jitter * eye, lower=True, check_finite=False), jitter
        except linalg.LinAlgError:
            logger.debug("Cholesky failed with jitter %.0e, escalating", jitter)
    raise GPFactorizationError("kernel matrix not positive definite after jitter escalation", n=len(K))


class GPModel:
    """Posterior of a zero-mean GP on mean-centered targets.

    The Cholesky factor of K + (noise + jitter)·I is computed once on
    construction and reused by every posterior query.
    """

    def __init__(self, X: np.ndarray, g: np.ndarray, hyper: GPHyperparameters) -> None:
        self.X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        g = np.asarray(g, dtype=np.float64).reshape(-1)
        if len(g) < 1 or len(g) != len(self.X):
            raise ValueError(f"need at least one observation with matching inputs, got {len(g)} and {len(self.X)}")
        self.g = g
        self.hyper = hyper
        self.g_mean = float(g.mean())
        K = matern52_matrix(self.X, self.X, hyper.lengthscales, hyper.variance) + hyper.noise * np.eye(len(g))
        self.chol, self.jitter = _factorize(K)
        self.alpha = linalg.cho_solve(self.chol, g - self.g_mean, check_finite=False)

    def posterior(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
        k = matern52_matrix(self.X, Xq, self.hyper.lengthscales, self.hyper.variance)
        mu = self.g_mean + k.T @ self.alpha
        v = linalg.cho_solve(self.chol, k, check_finite=False)
        var = self.hyper.variance - np.sum(k * v, axis=0)
        if (var < VARIANCE_FLOOR).any():
            logger.warning("GP posterior variance %.3g below floor; clamping to 0", float(var.min()))
        return mu, np.maximum(var, 0.0)

    def condition_on(self, X_extra: np.ndarray, g_extra: np.ndarray) -> GPModel:
        """Same hyperparameters, extra observations appended."""
        return GPModel(np.vstack([self.X, np.atleast_2d(X_extra)]), np.concatenate([self.g, g_extra]), self.hyper)

    def negative_log_marginal_likelihood(self) -> float:
        L = self.chol[0]
        n = len(self.g)
        return float(
            0.5 * (self.g - self.g_mean) @ self.alpha + np.log(np.diag(L)).sum() + 0.5 * n * math.log(2 * math.pi)
        )


def gp_posterior(gp: GPModel, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return gp.posterior(Xq)


def _objective(theta: np.ndarray, X: np.ndarray, z: np.ndarray, prior: bool) -> float:
    try:
        value = GPModel(X, z, GPHyperparameters.from_vector(theta)).negative_log_marginal_likelihood()
    except GPFactorizationError:
        return 1e10
    if prior:
        mean, std = LENGTHSCALE_PRIOR
        value += float(np.sum((theta[1:-1] - mean) ** 2) / (2 * std * std))
    return value if np.isfinite(value) else 1e10


def _best_fit(X: np.ndarray, z: np.ndarray, starts: list[np.ndarray], prior: bool) -> np.ndarray | None:
    bounds = [LOG_VARIANCE_BOUNDS] + [LOG_LENGTHSCALE_BOUNDS] * X.shape[1] + [LOG_NOISE_BOUNDS]
    best, best_value = None, math.inf
    for x0 in starts:
        try:
            res = optimize.minimize(_objective, x0, args=(X, z, prior), method="L-BFGS-B", bounds=bounds)
        except (ValueError, ArithmeticError, linalg.LinAlgError):
            logger.exception("GP hyperparameter optimisation raised")
            continue
        if res.fun < best_value and res.fun < 1e10 and np.isfinite(res.x).all():
            best, best_value = res.x, float(res.fun)
    return best


def standardize(g: np.ndarray) -> tuple[np.ndarray, float, float]:
    g = np.asarray(g, dtype=np.float64)
    scale = float(g.std()) if len(g) > 1 and g.std() > 0 else 1.0
    mean = float(g.mean())
    return (g - mean) / scale, mean, scale


def fit_hyperparameters(X: np.ndarray, z: np.ndarray, rng: np.random.Generator, restarts: int = 5) -> GPHyperparameters:
    """Maximize the marginal likelihood of standardized targets ``z`` from several starts."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    dim = X.shape[1]
    hyper = GPHyperparameters.default(dim)
    if len(z) >= 2:
        low = np.array([LOG_VARIANCE_BOUNDS[0]] + [LOG_LENGTHSCALE_BOUNDS[0]] * dim + [LOG_NOISE_BOUNDS[0]])
        high = np.array([LOG_VARIANCE_BOUNDS[1]] + [LOG_LENGTHSCALE_BOUNDS[1]] * dim + [LOG_NOISE_BOUNDS[1]])
        starts = [hyper.to_vector()] + [rng.uniform(low, high) for _ in range(restarts)]
        theta = _best_fit(X, z, starts, prior=False)
        if theta is None:
            logger.warning("Marginal-likelihood fit failed; falling back to MAP with a lengthscale prior")
            theta = _best_fit(X, z, starts, prior=True)
        if theta is None:
            logger.warning("MAP fit failed too; using default GP hyperparameters")
        else:
            hyper = GPHyperparameters.from_vector(theta)
    return hyper


def fit_gp(X: np.ndarray, g: np.ndarray, rng: np.random.Generator, restarts: int = 5) -> GPModel:
    """Fit on standardized targets, return the posterior in original units."""
    z, _, scale = standardize(g)
    hyper = fit_hyperparameters(X, z, rng, restarts)
    return GPModel(X, g, hyper.scaled(scale * scale))
