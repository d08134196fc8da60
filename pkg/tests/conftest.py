import numpy as np
import pytest

from drisce.protocol import SystemDims, crandn


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_dims():
    return SystemDims(m_bs=4, m_ue=2, m_s1=8, m_s2=6, i_frames=8, j_frames=6, k_pilots=2)


def cmat(rng, *shape):
    return crandn(rng, shape)


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b))
