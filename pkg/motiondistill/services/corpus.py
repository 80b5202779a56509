"""Synthetic multi-modal motion corpus.

Each item belongs to a family (a rest pose plus per-coordinate sinusoids
shared by the family) and continues after the observation in one of
``n_modes`` ways. A mode adds a band-limited deviation
``sum_b c_b * (1 - cos(pi * b * tau / F))`` that is zero at the last
observed frame, so every sequence is continuous across the boundary.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from motiondistill.config import SyntheticCorpusSpec
from motiondistill.motion.types import MotionCorpus

logger = logging.getLogger("motiondistill.corpus")

MIN_FREQUENCY_HZ = 0.25
MAX_FREQUENCY_HZ = 1.5
REST_POSE_SCALE = 0.5
CLIP_SIGMA = 3.0


def _deviation_basis(spec: SyntheticCorpusSpec) -> np.ndarray:
    """(band_limit, N) mode basis, zero up to and including frame H-1."""
    tau = np.clip(np.arange(spec.N) - (spec.H - 1), 0, None)
    b = np.arange(1, spec.band_limit + 1)[:, None]
    return 1.0 - np.cos(math.pi * b * tau[None, :] / spec.F)


def step_bound(spec: SyntheticCorpusSpec) -> float:
    """Upper bound on the pose change between the last observed and first future frame."""
    D = 3 * spec.J
    sinusoid = spec.amplitude * 2 * math.pi * MAX_FREQUENCY_HZ * spec.frame_dt
    deviation = CLIP_SIGMA * spec.amplitude * float(_deviation_basis(spec)[:, spec.H].sum())
    noise = 2 * CLIP_SIGMA * spec.noise_floor
    return math.sqrt(D) * (sinusoid + deviation + noise)


def gen_corpus(spec: SyntheticCorpusSpec) -> dict[str, MotionCorpus]:
    """Train and test splits, fully determined by ``spec`` (including its seed)."""
    rng = np.random.default_rng(spec.seed)
    D = 3 * spec.J

    # 1. Family and mode parameters
    rest = REST_POSE_SCALE * rng.standard_normal((spec.n_families, D))
    amp = spec.amplitude * rng.uniform(0.5, 1.0, (spec.n_families, D))
    freq = rng.uniform(MIN_FREQUENCY_HZ, MAX_FREQUENCY_HZ, (spec.n_families, D))
    phase = rng.uniform(0.0, 2 * math.pi, (spec.n_families, D))
    mode_coeffs = spec.amplitude * np.clip(
        rng.standard_normal((spec.n_families, spec.n_modes, spec.band_limit, D)), -CLIP_SIGMA, CLIP_SIGMA
    )
    basis = _deviation_basis(spec)
    t = np.arange(spec.N) * spec.frame_dt

    def draw(n: int, split: str) -> MotionCorpus:
        # 2. Items: family, mode and time shift, then clipped sensor noise
        families = rng.integers(0, spec.n_families, n)
        modes = rng.integers(0, spec.n_modes, n)
        shift = rng.uniform(0.0, 1.0 / MIN_FREQUENCY_HZ, n)
        arg = 2 * math.pi * freq[families][:, None] * (t[None, :, None] + shift[:, None, None]) + phase[families][:, None]
        frames = rest[families][:, None] + amp[families][:, None] * np.sin(arg)
        frames += np.einsum("bt,nbd->ntd", basis, mode_coeffs[families, modes])
        frames += spec.noise_floor * np.clip(rng.standard_normal(frames.shape), -CLIP_SIGMA, CLIP_SIGMA)
        metadata = {"split": split, "seed": spec.seed, "spec": spec.model_dump(mode="json"), "spec_hash": spec.spec_hash()}
        return MotionCorpus(frames, H=spec.H, F=spec.F, modes=modes, families=families, metadata=metadata)

    train = draw(spec.n_train, "train")
    test = draw(spec.n_test, "test")
    logger.info(
        "Generated %d train / %d test sequences (J=%d, H=%d, F=%d, %d modes)",
        len(train), len(test), spec.J, spec.H, spec.F, spec.n_modes,
    )
    return {"train": train, "test": test}
