"""Truncated DCT, observation padding and the inpainting splice."""

import math

import numpy as np
import pytest

from motiondistill.errors import ConfigError, NumericError, ShapeError
from motiondistill.motion.frequency import (
    apply_inpaint,
    condition,
    dct,
    dct_basis,
    from_frequency,
    idct,
    inpaint,
    observation_condition,
    pad_frames,
    to_frequency,
)
from motiondistill.motion.types import FrequencyCoeffs, InpaintMask, MotionSequence, SkeletonSpec
from motiondistill.services.corpus import gen_corpus


def _brute_force_inpaint(y_denoised, y_observed, H, N):
    L = y_denoised.shape[0]
    m = np.array([1.0] * H + [0.0] * (N - H))[:, None]
    x = m * idct(y_observed, N) + (1.0 - m) * idct(y_denoised, N)
    return dct(x, L)


class TestDCTBasis:
    def test_constant_row(self):
        np.testing.assert_allclose(dct_basis(4, 1), [[0.5, 0.5, 0.5, 0.5]])

    def test_two_point_basis(self):
        np.testing.assert_allclose(dct_basis(2, 2) @ np.array([1.0, 0.0]), [0.70711, 0.70711], atol=1e-5)

    @pytest.mark.parametrize("N", [1, 2, 7, 30])
    def test_orthonormal(self, N):
        B = dct_basis(N, N)
        np.testing.assert_allclose(B @ B.T, np.eye(N), atol=1e-12)

    def test_matches_formula(self):
        N, L = 6, 4
        B = dct_basis(N, L)
        for k in range(1, L):
            for n in range(N):
                assert B[k, n] == pytest.approx(math.sqrt(2 / N) * math.cos(math.pi * (2 * n + 1) * k / (2 * N)))

    def test_l_larger_than_n(self):
        with pytest.raises(ConfigError):
            dct_basis(3, 4)

    def test_basis_is_read_only(self):
        with pytest.raises(ValueError):
            dct_basis(5, 3)[0, 0] = 1.0


class TestTransform:
    def test_constant_sequence_dc_only(self):
        N, c = 8, 1.7
        y = dct(np.full((N, 3), c), N)
        np.testing.assert_allclose(y[0], c * math.sqrt(N))
        np.testing.assert_allclose(y[1:], 0.0, atol=1e-12)

    def test_two_frame_dc(self):
        """Row 0 of a constant four-frame sequence is 2c."""
        np.testing.assert_allclose(dct(np.full((4, 1), 3.0), 1), [[6.0]])

    def test_full_roundtrip(self, rng):
        x = rng.standard_normal((12, 6))
        np.testing.assert_allclose(idct(dct(x, 12), 12), x, atol=1e-12)

    def test_batched_matches_loop(self, rng):
        x = rng.standard_normal((3, 10, 6))
        batched = dct(x, 5)
        for i in range(3):
            np.testing.assert_allclose(batched[i], dct(x[i], 5), atol=1e-14)

    def test_truncation_is_projection(self, rng):
        x = rng.standard_normal((10, 3))
        once = idct(dct(x, 4), 10)
        np.testing.assert_allclose(idct(dct(once, 4), 10), once, atol=1e-12)

    def test_vector_input_rejected(self):
        with pytest.raises(ShapeError):
            dct(np.ones(4), 2)

    def test_synthetic_energy_in_low_rows(self, tiny_spec):
        corpus = gen_corpus(tiny_spec.model_copy(update={"H": 10, "F": 20, "n_train": 50}))["train"]
        y = dct(corpus.frames, corpus.N)
        L = corpus.N // 2
        assert np.sum(y[:, L:] ** 2) < 0.05 * np.sum(y**2)


class TestPadding:
    def test_repeats_last_frame(self):
        x_obs = np.arange(6.0).reshape(2, 3)
        padded = pad_frames(x_obs, 5)
        np.testing.assert_array_equal(padded[:2], x_obs)
        np.testing.assert_array_equal(padded[2:], np.tile(x_obs[-1], (3, 1)))

    def test_condition_of_static_pose(self):
        pose = np.array([[0.1, -0.2, 0.3]])
        c = condition(np.repeat(pose, 3, axis=0), 9, 4)
        np.testing.assert_allclose(c[0], pose[0] * 3.0)
        np.testing.assert_allclose(c[1:], 0.0, atol=1e-12)

    def test_too_short_total(self):
        with pytest.raises(ConfigError):
            pad_frames(np.ones((4, 3)), 3)

    def test_empty_observation(self):
        with pytest.raises(ShapeError):
            pad_frames(np.ones((0, 3)), 3)

    def test_typed_condition(self, rng):
        x_obs = rng.standard_normal((4, 6))
        c = observation_condition(x_obs, 10, 5)
        assert (c.L, c.N, c.H) == (5, 10, 4)
        np.testing.assert_allclose(c.coeffs, condition(x_obs, 10, 5))


class TestInpaint:
    @pytest.mark.parametrize("L", [3, 7, 10])
    def test_matches_brute_force(self, rng, L):
        H, N = 4, 10
        y_d, y_o = rng.standard_normal((L, 6)), rng.standard_normal((L, 6))
        np.testing.assert_allclose(inpaint(y_d, y_o, H, N), _brute_force_inpaint(y_d, y_o, H, N), atol=1e-12)

    def test_full_rank_observed_rows_exact(self, rng):
        H, N = 4, 10
        x_obs = rng.standard_normal((H, 6))
        y = inpaint(rng.standard_normal((N, 6)), condition(x_obs, N, N), H, N)
        np.testing.assert_allclose(idct(y, N)[:H], x_obs, atol=1e-8)

    def test_idempotent(self, rng):
        H, N, L = 3, 8, 8
        y_d, y_o = rng.standard_normal((L, 3)), rng.standard_normal((L, 3))
        once = inpaint(y_d, y_o, H, N)
        np.testing.assert_allclose(inpaint(once, y_o, H, N), once, atol=1e-12)

    def test_batched(self, rng):
        y_d, y_o = rng.standard_normal((2, 5, 3)), rng.standard_normal((2, 5, 3))
        out = inpaint(y_d, y_o, 3, 8)
        np.testing.assert_allclose(out[1], inpaint(y_d[1], y_o[1], 3, 8), atol=1e-14)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            inpaint(rng.standard_normal((4, 3)), rng.standard_normal((5, 3)), 2, 8)

    def test_typed_wrapper_checks_mask_length(self, rng):
        y = FrequencyCoeffs(rng.standard_normal((4, 3)), N=8)
        with pytest.raises(ShapeError):
            apply_inpaint(y, y, InpaintMask(H=2, F=5))
        out = apply_inpaint(y, y, InpaintMask(H=2, F=6))
        np.testing.assert_allclose(out.coeffs, inpaint(y.coeffs, y.coeffs, 2, 8), atol=1e-14)


class TestTypes:
    def test_mask_layout(self):
        np.testing.assert_array_equal(InpaintMask(H=2, F=3).m, [1, 1, 0, 0, 0])

    def test_skeleton_defaults(self):
        spec = SkeletonSpec(J=3)
        assert spec.dim == 9
        assert spec.names == ("joint_0", "joint_1", "joint_2")

    @pytest.mark.parametrize("kwargs", [{"J": 0}, {"J": 2, "frame_dt": 0.0}, {"J": 2, "names": ("a",)}])
    def test_skeleton_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SkeletonSpec(**kwargs)

    def test_sequence_rejects_nan(self):
        frames = np.zeros((5, 3))
        frames[2, 1] = np.nan
        with pytest.raises(NumericError):
            MotionSequence(frames, H=2, F=3)

    def test_sequence_shape(self):
        with pytest.raises(ShapeError):
            MotionSequence(np.zeros((5, 4)), H=2, F=3)

    def test_typed_roundtrip(self, rng):
        seq = MotionSequence(rng.standard_normal((7, 6)), H=3, F=4)
        back = from_frequency(to_frequency(seq, 7))
        assert back.H == 3
        np.testing.assert_allclose(back.frames, seq.frames, atol=1e-12)

    def test_coeffs_bounds(self):
        with pytest.raises(ConfigError):
            FrequencyCoeffs(np.zeros((5, 3)), N=4)
