"""GP surrogate, expected improvement and the batch suggestion policy."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from motiondistill.bayesopt.acquisition import SuggestSettings, Suggester, expected_improvement
from motiondistill.bayesopt.gp import GPHyperparameters, GPModel, fit_gp, gp_posterior
from motiondistill.bayesopt.kernels import matern52_ard, matern52_matrix
from motiondistill.bayesopt.loop import (
    BRANIN_MINIMUM,
    branin,
    branin_grid_minimum,
    branin_space,
    minimize,
    propose_round,
)
from motiondistill.bayesopt.space import ContinuousDimension, IntegerDimension, SearchSpace
from motiondistill.config import BayesOptSection
from motiondistill.errors import ConfigError, SearchExhaustedError
from motiondistill.models.records import TrialRecord


FAST = SuggestSettings(n_initial=5, candidates=256, refine_starts=2, gp_restarts=2)


def _done(trial_id, u, g):
    return TrialRecord(trial_id=trial_id, status="done", lam_raw={}, lam_encoded=list(u), g=g, seed=0)


def _pending(trial_id, u):
    return TrialRecord(trial_id=trial_id, status="pending", lam_raw={}, lam_encoded=list(u), seed=0)


def _unit_space(dim=3):
    return SearchSpace([ContinuousDimension(f"x{i}", 0.0, 1.0) for i in range(dim)])


class TestKernel:
    def test_zero_distance_is_variance(self):
        assert matern52_ard([0.2, 0.4], [0.2, 0.4], np.array([0.3, 0.5]), 2.5) == pytest.approx(2.5)

    def test_unit_distance(self):
        assert matern52_ard([0.0], [1.0], np.array([1.0]), 1.0) == pytest.approx(0.52400, abs=1e-4)

    def test_decays_to_zero(self):
        assert matern52_ard([0.0], [50.0], np.array([1.0]), 3.0) < 1e-30 * 3.0

    def test_lengthscale_per_dimension(self):
        k = matern52_ard([0.0, 0.0], [1.0, 2.0], np.array([1.0, 2.0]), 1.0)
        assert k == pytest.approx(matern52_ard([0.0], [math.sqrt(2.0)], np.array([1.0]), 1.0))

    def test_rejects_non_positive_lengthscale(self):
        with pytest.raises(ValueError):
            matern52_matrix(np.zeros((1, 2)), np.zeros((1, 2)), np.array([1.0, 0.0]), 1.0)


class TestGaussianProcess:
    def _oracle(self, gp, X, g, Xq):
        h = gp.hyper
        K = matern52_matrix(X, X, h.lengthscales, h.variance) + (h.noise + gp.jitter) * np.eye(len(X))
        k = matern52_matrix(X, Xq, h.lengthscales, h.variance)
        K_inv = np.linalg.inv(K)
        mu = g.mean() + k.T @ K_inv @ (g - g.mean())
        var = h.variance - np.einsum("ij,ik,kj->j", k, K_inv, k)
        return mu, var

    def test_dense_oracle(self, rng):
        X, g = rng.uniform(size=(12, 3)), rng.standard_normal(12)
        hyper = GPHyperparameters(variance=1.3, lengthscales=np.array([0.4, 0.7, 1.1]), noise=1e-4)
        gp = GPModel(X, g, hyper)
        Xq = rng.uniform(size=(1000, 3))
        mu, var = gp_posterior(gp, Xq)
        mu_ref, var_ref = self._oracle(gp, X, g, Xq)
        np.testing.assert_allclose(mu, mu_ref, atol=1e-8)
        np.testing.assert_allclose(var, np.maximum(var_ref, 0.0), atol=1e-8)

    def test_five_points(self, rng):
        X, g = rng.uniform(size=(5, 3)), rng.standard_normal(5)
        gp = GPModel(X, g, GPHyperparameters(1.0, np.full(3, 0.5), 1e-6))
        Xq = rng.uniform(size=(7, 3))
        mu, var = gp.posterior(Xq)
        mu_ref, var_ref = self._oracle(gp, X, g, Xq)
        np.testing.assert_allclose(mu, mu_ref, atol=1e-8)
        np.testing.assert_allclose(var, np.maximum(var_ref, 0.0), atol=1e-8)

    def test_interpolates_training_points(self, rng):
        X, g = rng.uniform(size=(8, 2)), rng.standard_normal(8)
        gp = GPModel(X, g, GPHyperparameters(1.0, np.full(2, 0.3), 1e-10))
        mu, var = gp.posterior(X)
        np.testing.assert_allclose(mu, g, atol=1e-5)
        assert np.all(var < 1e-5)

    def test_reverts_to_prior_far_away(self):
        gp = GPModel(np.array([[0.0]]), np.array([4.0]), GPHyperparameters(2.0, np.array([0.1]), 1e-6))
        mu, var = gp.posterior(np.array([[100.0]]))
        assert mu[0] == pytest.approx(4.0)
        assert var[0] == pytest.approx(2.0)

    def test_duplicate_inputs_factorize(self):
        X = np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.9]])
        gp = GPModel(X, np.array([1.0, 1.0, 0.0]), GPHyperparameters(1.0, np.full(2, 0.3), 0.0))
        assert gp.jitter > 0
        assert np.isfinite(gp.posterior(X)[0]).all()

    def test_fit_returns_original_units(self, rng):
        X = rng.uniform(size=(10, 2))
        g = 100.0 + 50.0 * np.sin(3 * X[:, 0]) + X[:, 1]
        gp = fit_gp(X, g, np.random.default_rng(0), restarts=2)
        mu, _ = gp.posterior(X)
        np.testing.assert_allclose(mu, g, atol=0.5 * g.std())

    def test_empty_history(self):
        with pytest.raises(ValueError):
            GPModel(np.zeros((0, 2)), np.zeros(0), GPHyperparameters.default(2))


class TestExpectedImprovement:
    def test_zero_sigma_worse_mean(self):
        assert expected_improvement(2.0, 0.0, 1.0) == 0.0

    def test_zero_sigma_exact(self):
        assert expected_improvement(0.25, 0.0, 1.0) == 0.75

    def test_at_incumbent(self):
        assert expected_improvement(1.0, 1.0, 1.0) == pytest.approx(0.39894, abs=1e-5)

    def test_monte_carlo_grid(self):
        rng = np.random.default_rng(42)
        z = rng.standard_normal(4_000_000)
        grid = [(mu, sigma, 0.0) for mu in (-1.0, -0.5, 0.0, 0.3, 0.8) for sigma in (0.5, 1.0, 2.0, 3.0)]
        for mu, sigma, g_best in grid:
            mc = np.maximum(g_best - (mu + sigma * z), 0.0).mean()
            assert expected_improvement(mu, sigma, g_best) == pytest.approx(mc, rel=0.01)

    def test_non_negative_and_increasing_in_sigma(self):
        mu = np.linspace(-2, 2, 41)
        previous = expected_improvement(mu, np.full_like(mu, 0.1), 0.0)
        assert np.all(previous >= 0)
        for sigma in np.linspace(0.2, 3.0, 15):
            current = expected_improvement(mu, np.full_like(mu, sigma), 0.0)
            assert np.all(current >= previous)
            assert np.all(current[np.abs(mu) <= 0.3] > previous[np.abs(mu) <= 0.3])
            previous = current

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            expected_improvement(0.0, -1.0, 0.0)

    def test_closed_form(self):
        mu, sigma, best = 0.3, 0.7, 0.5
        z = (best - mu) / sigma
        assert expected_improvement(mu, sigma, best) == pytest.approx((best - mu) * norm.cdf(z) + sigma * norm.pdf(z))


class TestSearchSpace:
    def test_from_config(self):
        space = SearchSpace.from_config(BayesOptSection())
        assert space.names == ["lr", "n_layers", "d_model"]
        raw = space.decode([0.0, 1.0, 0.5])
        assert raw["lr"] == pytest.approx(1e-4)
        assert raw["n_layers"] == 12
        assert raw["d_model"] % 64 == 0 and 256 <= raw["d_model"] <= 768

    def test_log_scale_midpoint(self):
        dim = ContinuousDimension("lr", 1e-4, 1e-2, log=True)
        assert dim.decode(0.5) == pytest.approx(1e-3)
        assert dim.encode(1e-3) == pytest.approx(0.5)

    def test_integer_snap(self):
        dim = IntegerDimension("d", 256, 768, step=64)
        assert dim.decode(dim.snap(0.13)) % 64 == 0
        assert dim.n_levels == 9

    @pytest.mark.parametrize("bounds", [(1.0, 1.0), (2.0, 1.0)])
    def test_unordered_bounds(self, bounds):
        with pytest.raises(ConfigError):
            ContinuousDimension("x", *bounds)

    def test_neighbours_nearest_first(self):
        space = SearchSpace([IntegerDimension("a", 0, 4)])
        points = [float(p[0]) for p in space.integer_neighbours(np.array([0.5]))]
        assert points[0] == 0.5
        assert sorted(points) == [0.0, 0.25, 0.5, 0.75, 1.0]


class TestSuggester:
    def test_cold_start_low_discrepancy(self):
        suggester = Suggester(_unit_space(), FAST, seed=3)
        batch = propose_round(suggester, [], 5, seed=3)
        points = np.array([t.lam_encoded for t in batch])
        assert [t.trial_id for t in batch] == [0, 1, 2, 3, 4]
        assert all(t.status == "pending" for t in batch)
        np.testing.assert_allclose(points, suggester.initial)
        assert len({tuple(p) for p in points.round(12)}) == 5

    def test_cold_start_deterministic(self):
        first = propose_round(Suggester(_unit_space(), FAST, seed=3), [], 5, seed=3)
        second = propose_round(Suggester(_unit_space(), FAST, seed=3), [], 5, seed=3)
        assert [t.lam_encoded for t in first] == [t.lam_encoded for t in second]

    def test_differs_from_single_done_trial(self):
        space = SearchSpace([IntegerDimension("a", 0, 3), IntegerDimension("b", 0, 3)])
        suggester = Suggester(space, SuggestSettings(n_initial=1, candidates=64, refine_starts=1, gp_restarts=1))
        done = _done(0, suggester.initial[0], 1.0)
        u = suggester.suggest([done])
        assert not np.allclose(u, done.lam_encoded)

    def test_pending_never_repeated(self, rng):
        space = _unit_space(2)
        suggester = Suggester(space, FAST, seed=1)
        history = [_done(i, rng.uniform(size=2), float(rng.standard_normal())) for i in range(6)]
        history.append(_pending(6, [0.5, 0.5]))
        batch = propose_round(suggester, history, 3, seed=1)
        taken = [np.asarray(t.lam_encoded) for t in history]
        for t in batch:
            u = np.asarray(t.lam_encoded)
            assert all(np.max(np.abs(u - v)) > 1e-9 for v in taken)
            taken.append(u)

    def test_nudge_skips_taken_neighbour(self):
        suggester = Suggester(_unit_space(2), FAST, seed=0)
        u = np.array([0.5, 0.5])
        taken = [u.copy(), u + np.array([1e-6, 0.0])]
        moved = suggester._deduplicate(u.copy(), taken)
        assert all(np.max(np.abs(moved - t)) > 1e-9 for t in taken)

    def test_nudge_skips_a_run_of_taken_points(self):
        suggester = Suggester(_unit_space(1), FAST, seed=0)
        u = np.array([0.5])
        taken = [u + k * 1e-6 for k in range(-20, 21)]
        moved = suggester._deduplicate(u.copy(), taken)
        assert all(np.max(np.abs(moved - t)) > 1e-9 for t in taken)
        assert 0.0 <= moved[0] <= 1.0

    def test_mixed_space_falls_back_to_continuous_axis(self):
        space = SearchSpace([IntegerDimension("a", 0, 1), ContinuousDimension("x", 0.0, 1.0)])
        suggester = Suggester(space, FAST, seed=0)
        u = np.array([0.0, 0.25])
        taken = [u.copy(), np.array([1.0, 0.25]), np.array([0.0, 0.25 + 1e-6])]
        moved = suggester._deduplicate(u.copy(), taken)
        assert all(np.max(np.abs(moved - t)) > 1e-9 for t in taken)
        assert moved[0] in (0.0, 1.0)

    def test_argmax_invariant_to_positive_scaling(self, rng):
        space = _unit_space(2)
        X = rng.uniform(size=(8, 2))
        g = np.sin(4 * X[:, 0]) + X[:, 1] ** 2
        history = [_done(i, X[i], float(g[i])) for i in range(8)]
        scaled = [_done(i, X[i], float(4.0 * g[i] + 7.0)) for i in range(8)]
        u = Suggester(space, FAST, seed=2).suggest(history)
        v = Suggester(space, FAST, seed=2).suggest(scaled)
        np.testing.assert_allclose(u, v, atol=1e-3)

    def test_exhausted_integer_grid(self):
        space = SearchSpace([IntegerDimension("a", 0, 1), IntegerDimension("b", 0, 1)])
        grid = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
        history = [_done(i, p, float(i)) for i, p in enumerate(grid)]
        suggester = Suggester(space, SuggestSettings(n_initial=2, candidates=16, refine_starts=1, gp_restarts=1))
        with pytest.raises(SearchExhaustedError):
            suggester.suggest(history)

    def test_minimize_small_budget(self):
        history = minimize(branin, branin_space(), rounds=2, parallel=5, settings=FAST, seed=0)
        assert len(history) == 10
        assert [t.trial_id for t in history] == list(range(10))
        assert all(t.status == "done" and math.isfinite(t.g) for t in history)


class TestBranin:
    def test_known_minimum(self):
        assert branin({"x1": math.pi, "x2": 2.275}) == pytest.approx(BRANIN_MINIMUM, abs=1e-5)

    def test_grid_minimum(self):
        assert branin_grid_minimum(1000) == pytest.approx(BRANIN_MINIMUM, abs=1e-3)

    @pytest.mark.slow
    def test_reaches_grid_optimum(self):
        target = branin_grid_minimum(1000)
        hits = 0
        for seed in range(10):
            history = minimize(branin, branin_space(), rounds=40, parallel=5, seed=seed)
            best = min(t.g for t in history)
            hits += best <= target + 0.05
        assert hits >= 8
