import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the shared oracles module

from isacbip.config import GridSpec, PipelineConfig, desk_scale


@pytest.fixture(scope="session")
def cfg() -> PipelineConfig:
    return PipelineConfig()


@pytest.fixture(scope="session")
def desk_cfg() -> PipelineConfig:
    return desk_scale(PipelineConfig())


@pytest.fixture(scope="session")
def fast_grid() -> GridSpec:
    """Band-limited Doppler search; the workhorse grid for bulk tests."""
    return GridSpec(doppler_band_hz=2500.0)
