import numpy as np
import pytest

from cwct.config import default_config
from cwct.weights import init_weights

SMALL = dict(history_len=64, trend_len=8, num_windows=4, history_dim=16, trend_dim=64, num_actions=5,
             decoder_swin_layers=(2, 2, 2, 2), decoder_expansion=(2, 2, 4), decoder_window_size=4)


def small_config(**overrides):
    return default_config(12, **{**SMALL, **overrides})


@pytest.fixture(scope="session")
def small_cfg():
    return small_config()


@pytest.fixture(scope="session")
def small_store(small_cfg):
    return init_weights(small_cfg, seed=5)


@pytest.fixture(scope="session")
def default_cfg():
    return default_config(64)


@pytest.fixture(scope="session")
def default_store(default_cfg):
    return init_weights(default_cfg, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def frames(cfg, n, seed=0):
    return np.random.default_rng(seed).standard_normal((n, cfg.input_dim)).astype(np.float32)
