"""Shared fixtures: tiny configs and a small synthetic corpus."""

import numpy as np
import pytest

from motiondistill.config import SyntheticCorpusSpec, StudentConfig, TeacherConfig
from motiondistill.services.corpus import gen_corpus


TINY_SPEC = SyntheticCorpusSpec(J=2, H=4, F=4, n_train=40, n_test=8, n_modes=3, n_families=2, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def tiny_spec():
    return TINY_SPEC


@pytest.fixture(scope="session")
def tiny_splits():
    return gen_corpus(TINY_SPEC)


@pytest.fixture(scope="session")
def tiny_corpus(tiny_splits):
    return tiny_splits["train"]


@pytest.fixture
def teacher_config():
    """2 layers, d=16, bound to L=N/2=4 and J=2."""
    return TeacherConfig(n_layers=2, d_model=16, n_heads=2, ffn_dim=32, se_reduction=4).bind(4, 2)


@pytest.fixture
def student_config():
    return StudentConfig(n_layers=2, d_model=16, se_reduction=4, channel_expansion=2).bind(4, 2)
