"""Search objectives: output discrepancy and the weighted ratio score."""

import numpy as np
import pytest

from motiondistill.errors import NumericError
from motiondistill.models.records import ObjectiveComponents
from motiondistill.services.objectives import (
    DEFAULT_WEIGHTS,
    ValidationSet,
    best_of_many_ade,
    combine,
    make_validation_set,
    objective_case1,
    objective_case2,
    reference_outputs,
    relative_change,
)

L = 2


class OffsetPredictor:
    """Returns the initial noise shifted by ``offset``; samples are offset Gaussian futures."""

    def __init__(self, offset=0.0, scale=1.0):
        self.offset = offset
        self.scale = scale

    def coefficients(self, x_obs, eps, rng=None):
        return self.scale * eps + self.offset

    def sample(self, x_obs, S, rng):
        return rng.standard_normal((S, 4, x_obs.shape[-1])) + self.offset

    def predict_one(self, x_obs, rng):
        return self.sample(x_obs, 1, rng)[0]


@pytest.fixture
def validation(tiny_corpus):
    return make_validation_set(tiny_corpus, size=10, L=L, seed=0, batch_size=4)


class TestValidationSet:
    def test_batching(self, validation):
        assert validation.M == 10
        assert [len(b) for b in validation.batches] == [4, 4, 2]
        assert len(validation.corpus) == 10

    def test_deterministic(self, tiny_corpus, validation):
        again = make_validation_set(tiny_corpus, size=10, L=L, seed=0, batch_size=4)
        for a, b in zip(validation.batches, again.batches):
            np.testing.assert_array_equal(a.eps, b.eps)
            np.testing.assert_array_equal(a.x_obs, b.x_obs)

    def test_reference_outputs_per_batch(self, validation):
        outputs = reference_outputs(OffsetPredictor(), validation)
        assert [o.shape for o in outputs] == [(4, L, 6), (4, L, 6), (2, L, 6)]


class TestCase1:
    def test_identical_models(self, validation):
        model = OffsetPredictor()
        assert objective_case1(model, model, validation) == 0.0

    @pytest.mark.parametrize("delta", [0.1, 0.5, 2.0])
    def test_constant_offset(self, validation, delta):
        # each sample differs by delta in every one of its L × 3J entries
        value = objective_case1(OffsetPredictor(delta), OffsetPredictor(), validation)
        assert value == pytest.approx(delta**2 * L * 6)

    def test_precomputed_reference(self, validation):
        teacher = OffsetPredictor()
        outputs = reference_outputs(teacher, validation)
        student = OffsetPredictor(0.3)
        assert objective_case1(student, teacher, validation, outputs) == pytest.approx(
            objective_case1(student, teacher, validation)
        )

    def test_empty_validation(self, tiny_corpus):
        empty = ValidationSet(batches=(), corpus=tiny_corpus, seed=0)
        with pytest.raises(ValueError):
            objective_case1(OffsetPredictor(), OffsetPredictor(), empty)


class TestCombine:
    def test_weighted_sum(self):
        components = ObjectiveComponents(ratio_err=0.1, ratio_acc=0.02, ratio_inf=-0.9)
        assert combine(components) == pytest.approx(15 * 0.1 + 15 * 0.02 - 0.9)
        assert combine(components) == pytest.approx(0.9)

    def test_doubled_time(self):
        ratio_inf = relative_change(2.0, 1.0, "inference time")
        assert ratio_inf == pytest.approx(1.0)
        assert combine(ObjectiveComponents(ratio_err=0.0, ratio_acc=0.0, ratio_inf=ratio_inf)) == pytest.approx(1.0)

    def test_custom_weights(self):
        components = ObjectiveComponents(ratio_err=1.0, ratio_acc=1.0, ratio_inf=1.0)
        assert combine(components, (1.0, 2.0, 3.0)) == 6.0
        assert DEFAULT_WEIGHTS == (15.0, 15.0, 1.0)

    def test_zero_reference(self):
        with pytest.raises(NumericError):
            relative_change(0.5, 0.0, "accuracy")


class TestCase2:
    def test_self_comparison(self, validation):
        model = OffsetPredictor()
        g, components = objective_case2(model, model, validation, samples=3, repeats=2)
        assert components.ratio_err == 0.0
        assert components.ratio_acc == 0.0
        assert g == pytest.approx(components.ratio_inf)

    def test_scaled_student(self, validation):
        g, components = objective_case2(
            OffsetPredictor(scale=1.5), OffsetPredictor(), validation, samples=3, repeats=2, reference_time=1.0
        )
        assert components.ratio_err == pytest.approx(0.5)
        assert components.reference_time == 1.0

    def test_reference_accuracy_is_reused(self, validation):
        model = OffsetPredictor()
        reference = best_of_many_ade(model, validation.corpus, 3, validation.seed)
        _, components = objective_case2(model, model, validation, samples=3, repeats=1, reference_acc=2 * reference)
        assert components.ratio_acc == pytest.approx(-0.5)

    def test_zero_reference_accuracy(self, validation):
        model = OffsetPredictor()
        with pytest.raises(NumericError):
            objective_case2(model, model, validation, samples=2, repeats=1, reference_acc=0.0)

    def test_zero_reference_output(self, validation):
        with pytest.raises(NumericError):
            objective_case2(OffsetPredictor(), OffsetPredictor(scale=0.0), validation, samples=2, repeats=1)

    def test_best_of_many_is_seeded(self, validation):
        model = OffsetPredictor()
        first = best_of_many_ade(model, validation.corpus, 4, seed=9)
        assert best_of_many_ade(model, validation.corpus, 4, seed=9) == first
        assert best_of_many_ade(model, validation.corpus, 4, seed=10) != first
