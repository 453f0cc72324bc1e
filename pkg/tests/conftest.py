import numpy as np
import pytest

from mclnn import DatasetConfig, default_spec, generate_dataset


@pytest.fixture(scope="session")
def tiny_linear_dataset():
    """Small but real linear-spring dataset for fast training/loss tests."""
    spec = default_spec("linear_spring")
    config = DatasetConfig(n_trajectories=6, points_per_trajectory=5, seed=7)
    return spec, config, generate_dataset(spec, config)


def random_state(seed, n=3, planar=False):
    from mclnn import ParticleState

    rng = np.random.default_rng(seed)
    q = rng.uniform(-2, 2, size=(n, 3))
    v = rng.uniform(-1, 1, size=(n, 3))
    if planar:
        q[:, 2] = 0.0
        v[:, 2] = 0.0
    return ParticleState(q, v, np.ones(n))
