"""Diversity, accuracy and multimodal metrics, plus the latency benchmark."""

import itertools
import math
import time

import numpy as np
import pytest

from motiondistill.config import StudentConfig, TeacherConfig
from motiondistill.errors import ShapeError
from motiondistill.motion.types import MotionCorpus
from motiondistill.networks.mixer import MixerDenoiser
from motiondistill.networks.transformer import TransformerDenoiser
from motiondistill.services.benchmark import benchmark_inference, benchmark_predictor
from motiondistill.services.diffusion import make_plan, make_schedule
from motiondistill.services.evaluation import (
    PredictionSet,
    ade,
    aggregate_bmw,
    apd,
    build_multimodal_gt,
    evaluate_corpus,
    fde,
    mm_metrics,
    sample_errors,
)
from motiondistill.services.predictors import DirectPredictor, MultiStepPredictor, OneStepPredictor


def _brute_ade(sample, gt):
    F = len(gt)
    return sum(math.dist(sample[t], gt[t]) for t in range(F)) / F


class GroundTruthSampler:
    """Every sample equals the item's true future."""

    def __init__(self, corpus):
        self.lookup = {corpus.observations[i].tobytes(): corpus.futures[i] for i in range(len(corpus))}

    def sample(self, x_obs, S, rng):
        return np.repeat(self.lookup[np.asarray(x_obs).tobytes()][None], S, axis=0)


class TestAPD:
    def test_pair_distance(self):
        samples = np.zeros((2, 3, 3))
        samples[1, 0, 0] = 3.0
        assert apd(samples) == pytest.approx(3.0)

    def test_identical_samples(self, rng):
        sample = rng.standard_normal((4, 6))
        assert apd(np.repeat(sample[None], 5, axis=0)) == 0.0

    def test_brute_force(self, rng):
        samples = rng.standard_normal((6, 4, 6))
        pairs = list(itertools.combinations(range(6), 2))
        expected = sum(np.linalg.norm(samples[i] - samples[j]) for i, j in pairs) / len(pairs)
        assert apd(samples) == pytest.approx(expected)

    def test_single_sample(self, rng):
        assert apd(rng.standard_normal((1, 4, 6))) == 0.0


class TestDisplacement:
    @pytest.mark.parametrize("d", [0.1, 1.0, 2.5])
    def test_uniform_offset(self, rng, d):
        gt = rng.standard_normal((5, 6))
        # every coordinate shifted by d: per-frame distance d·sqrt(3J)
        assert ade(gt + d, gt) == pytest.approx(d * math.sqrt(6))
        assert fde(gt + d, gt) == pytest.approx(d * math.sqrt(6))

    def test_brute_force(self, rng):
        sample, gt = rng.standard_normal((2, 7, 6))
        assert ade(sample, gt) == pytest.approx(_brute_ade(sample, gt))
        assert fde(sample, gt) == pytest.approx(math.dist(sample[-1], gt[-1]))

    def test_sample_errors(self, rng):
        samples, gt = rng.standard_normal((5, 7, 6)), rng.standard_normal((7, 6))
        ade_s, fde_s = sample_errors(samples, gt)
        np.testing.assert_allclose(ade_s, [ade(s, gt) for s in samples])
        np.testing.assert_allclose(fde_s, [fde(s, gt) for s in samples])

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            ade(rng.standard_normal((5, 6)), rng.standard_normal((5, 9)))


class TestAggregate:
    def test_best_median_worst(self):
        bmw = aggregate_bmw(np.array([3.0, 1.0, 2.0]))
        assert (bmw.best, bmw.median, bmw.worst) == (1.0, 2.0, 3.0)

    def test_even_count_uses_lower_median(self):
        assert aggregate_bmw([1.0, 2.0, 3.0, 4.0]).median == 2.0

    def test_single_error(self):
        bmw = aggregate_bmw([0.7])
        assert bmw.best == bmw.median == bmw.worst == 0.7

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_bmw([])


class TestMultimodal:
    def test_single_future_matches_ade(self, rng):
        samples, gt = rng.standard_normal((5, 4, 6)), rng.standard_normal((4, 6))
        mmade, mmfde = mm_metrics(samples, gt[None])
        ade_s, fde_s = sample_errors(samples, gt)
        assert mmade == aggregate_bmw(ade_s)
        assert mmfde == aggregate_bmw(fde_s)

    def test_duplicate_futures(self, rng):
        samples, futures = rng.standard_normal((5, 4, 6)), rng.standard_normal((3, 4, 6))
        doubled = np.concatenate([futures, futures])
        assert mm_metrics(samples, doubled) == mm_metrics(samples, futures)

    def test_brute_force(self, rng):
        samples, futures = rng.standard_normal((4, 3, 6)), rng.standard_normal((5, 3, 6))
        per_sample = [min(_brute_ade(s, f) for f in futures) for s in samples]
        mmade, _ = mm_metrics(samples, futures)
        assert mmade.best == pytest.approx(min(per_sample))
        assert mmade.worst == pytest.approx(max(per_sample))

    def test_never_worse_than_own_future(self, rng):
        samples, futures = rng.standard_normal((6, 4, 6)), rng.standard_normal((4, 4, 6))
        mmade, mmfde = mm_metrics(samples, futures)
        ade_s, fde_s = sample_errors(samples, futures[0])
        assert mmade.best <= aggregate_bmw(ade_s).best
        assert mmfde.best <= aggregate_bmw(fde_s).best

    def test_empty_set(self, rng):
        with pytest.raises(ValueError):
            mm_metrics(rng.standard_normal((2, 4, 6)), np.zeros((0, 4, 6)))


class TestMultimodalGroundTruth:
    def test_tiny_tau_keeps_own_future(self, tiny_corpus):
        gt = build_multimodal_gt(tiny_corpus, 1e-12)
        for i in range(len(tiny_corpus)):
            assert list(gt.members[i]) == [i]
            np.testing.assert_array_equal(gt.for_item(i)[0], tiny_corpus.futures[i])

    def test_huge_tau_keeps_everything(self, tiny_corpus):
        gt = build_multimodal_gt(tiny_corpus, 1e6)
        assert all(len(m) == len(tiny_corpus) for m in gt.members)

    def test_threshold_brute_force(self, tiny_corpus):
        last = tiny_corpus.observations[:, -1]
        tau = float(np.median([math.dist(last[0], last[j]) for j in range(len(last))]))
        gt = build_multimodal_gt(tiny_corpus, tau)
        for i in range(len(last)):
            expected = [j for j in range(len(last)) if math.dist(last[i], last[j]) <= tau]
            assert list(gt.members[i]) == expected

    def test_invalid_tau(self, tiny_corpus):
        with pytest.raises(ValueError):
            build_multimodal_gt(tiny_corpus, 0.0)


@pytest.mark.slow
class TestSpeedup:
    """One forward pass against a 20-step sampler of the same width and depth."""

    H, F, J = 10, 15, 3

    def _teacher(self, rng):
        config = TeacherConfig(n_layers=4, d_model=64, n_heads=4, ffn_dim=128).bind(self.H + self.F, self.J)
        return TransformerDenoiser(config, rng)

    def _multi_step(self, model):
        schedule = make_schedule(100)
        return MultiStepPredictor(model, schedule, make_plan(schedule, 20), self.H, self.F)

    def test_one_step_copy_against_twenty_steps(self):
        rng = np.random.default_rng(0)
        teacher = self._teacher(rng)
        x_obs = rng.standard_normal((self.H, 3 * self.J))
        multi = benchmark_predictor(self._multi_step(teacher), x_obs, repeats=5).min_seconds
        one = benchmark_predictor(OneStepPredictor(teacher, self.H, self.F, step=99), x_obs, repeats=20).min_seconds
        assert 10.0 <= multi / one <= 30.0

    def test_mixer_student_against_twenty_steps(self):
        rng = np.random.default_rng(0)
        teacher = self._teacher(rng)
        student = MixerDenoiser(StudentConfig(n_layers=4, d_model=64).bind(self.H + self.F, self.J), rng)
        x_obs = rng.standard_normal((self.H, 3 * self.J))
        multi = benchmark_predictor(self._multi_step(teacher), x_obs, repeats=5).min_seconds
        one = benchmark_predictor(DirectPredictor(student, self.H, self.F), x_obs, repeats=20).min_seconds
        assert multi / one >= 10.0


class TestSampleOrder:
    def test_metrics_invariant_to_sample_permutation(self, rng):
        samples = rng.standard_normal((7, 5, 6))
        gt = rng.standard_normal((5, 6))
        futures = rng.standard_normal((3, 5, 6))
        shuffled = samples[rng.permutation(7)]

        assert apd(shuffled) == pytest.approx(apd(samples), rel=1e-12)
        ade_a, fde_a = sample_errors(samples, gt)
        ade_b, fde_b = sample_errors(shuffled, gt)
        assert aggregate_bmw(ade_b) == aggregate_bmw(ade_a)
        assert aggregate_bmw(fde_b) == aggregate_bmw(fde_a)
        assert mm_metrics(shuffled, futures) == mm_metrics(samples, futures)


class TestPredictionSet:
    def test_shape_checks(self, rng):
        with pytest.raises(ShapeError):
            PredictionSet(samples=rng.standard_normal((3, 4, 6)), gt=np.zeros((5, 6)), obs=np.zeros((4, 6)))
        with pytest.raises(ShapeError):
            PredictionSet(samples=rng.standard_normal((3, 4, 6)), gt=np.zeros((4, 6)), obs=np.zeros((4, 3)))


class TestEvaluateCorpus:
    def test_perfect_sampler(self, tiny_splits):
        test = tiny_splits["test"]
        row = evaluate_corpus(GroundTruthSampler(test), test, samples=3, tau=1e-12, rng=np.random.default_rng(0))
        assert row.apd == 0.0
        for metric in (row.ade, row.fde, row.mmade, row.mmfde):
            assert (metric.best, metric.median, metric.worst) == (0.0, 0.0, 0.0)
        assert row.n_items == len(test)
        assert row.samples == 3

    def test_max_items_and_labels(self, tiny_splits):
        test = tiny_splits["test"]
        row = evaluate_corpus(
            GroundTruthSampler(test), test, samples=1, tau=0.1, rng=np.random.default_rng(0),
            model="reference", max_items=2, inference_seconds=0.5,
        )
        assert row.n_items == 2
        assert row.model == "reference"
        assert row.inference_seconds == 0.5

    def test_shifted_sampler(self):
        frames = np.zeros((2, 5, 3))
        corpus = MotionCorpus(frames, H=2, F=3)

        class Shifted:
            def sample(self, x_obs, S, rng):
                return np.full((S, 3, 3), 2.0)

        row = evaluate_corpus(Shifted(), corpus, samples=2, tau=1.0, rng=np.random.default_rng(0))
        assert row.ade.best == pytest.approx(2.0 * math.sqrt(3))
        assert row.mmfde.worst == pytest.approx(2.0 * math.sqrt(3))


class TestBenchmark:
    def test_sleep_timing(self):
        result = benchmark_inference(lambda: time.sleep(0.01), repeats=5)
        assert result.repeats == 5
        assert len(result.samples) == 5
        assert 0.009 <= result.mean_seconds <= 0.013 * 3
        assert result.min_seconds <= result.mean_seconds

    def test_warmup_is_untimed(self):
        calls = []
        benchmark_inference(lambda: calls.append(1), repeats=3, warmup=2)
        assert len(calls) == 5

    def test_single_repeat(self):
        assert benchmark_inference(lambda: None, repeats=1).std_seconds == 0.0

    def test_invalid_repeats(self):
        with pytest.raises(ValueError):
            benchmark_inference(lambda: None, repeats=0)

    def test_records_pinned_threads(self, monkeypatch):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            monkeypatch.setenv(var, "1")
        assert benchmark_inference(lambda: None, repeats=2).blas_threads == 1

    def test_warns_when_threads_unpinned(self, monkeypatch, caplog):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            monkeypatch.delenv(var, raising=False)
        with caplog.at_level("WARNING", logger="motiondistill.bench"):
            result = benchmark_inference(lambda: None, repeats=2)
        assert result.blas_threads is None
        assert any("not pinned" in r.getMessage() for r in caplog.records)
