import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spectrumlab import Emitter, Scene


@pytest.fixture
def quiet_scene() -> Scene:
    return Scene(emitters=(), noise_density=1e-12, rng_seed=7)


@pytest.fixture
def tv_scene() -> Scene:
    """Two always-on TV-like carriers in the 400-800 MHz band."""
    return Scene(
        emitters=(
            Emitter(center_freq=602e6, bandwidth=8e6, power=1e-6),
            Emitter(center_freq=730e6, bandwidth=8e6, power=5e-7),
        ),
        noise_density=1e-12,
        rng_seed=11,
    )
