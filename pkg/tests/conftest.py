import numpy as np
import pytest

import bookimpact.sim as sim


@pytest.fixture(scope="session")
def large_tick_stream():
    return sim.generate(sim.large_tick_config(300_000, seed=11, n_days=10))


@pytest.fixture(scope="session")
def small_tick_stream():
    return sim.generate(sim.small_tick_config(300_000, seed=12, n_days=10))


@pytest.fixture(scope="session")
def planted_stream():
    return sim.generate(sim.planted_kernel_config(400_000, seed=13,
                                                  n_days=10, kernel_lag=30))


@pytest.fixture(scope="session")
def iid_stream():
    cfg = sim.GeneratorConfig(
        n_events=300_000, seed=14, n_days=10,
        type_probabilities=np.full(6, 1.0 / 6.0),
        sign_process="iid", gap_process="constant",
        delta_r=np.array([0.0, 0.5, 0.0, 0.0, 0.5, 0.5]))
    return sim.generate(cfg)
