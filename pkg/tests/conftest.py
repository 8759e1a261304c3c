import numpy as np
import pytest

from clawelab.pipeline.fermi_hubbard import PFAConfig, constant_schedule
from clawelab.pipeline.states import pure_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bell_state():
    return pure_state(np.array([1, 0, 0, 1]) / np.sqrt(2))


@pytest.fixture
def schedule():
    return constant_schedule(2.0, t_final=2.0)


@pytest.fixture
def pfa_config():
    return PFAConfig(n_steps=10, n_t=1)


@pytest.fixture
def write_config(tmp_path):
    """Write an INI config into tmp_path and return its path."""
    def _write(text: str, name: str = "experiment.ini"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write
