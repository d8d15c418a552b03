import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from work_fluctuations.models.hilbert import HamiltonianSpec, spectrum  # noqa: E402
from work_fluctuations.models.pulses import ProtocolAngles  # noqa: E402
from work_fluctuations.pipeline import build_drive, theory_dataset  # noqa: E402
from work_fluctuations.utils.config import DEFAULT_ALPHA, DEFAULT_GAMMA, RunConfig  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size Monte Carlo runs, enabled with WORK_FLUCT_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("WORK_FLUCT_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set WORK_FLUCT_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def default_spec():
    return HamiltonianSpec(dnu_h=2000.0, dnu_c=4000.0, j_coupling=215.1)


@pytest.fixture
def default_table(default_spec):
    return spectrum(default_spec)


@pytest.fixture
def default_angles():
    return ProtocolAngles(alpha=DEFAULT_ALPHA, gamma=DEFAULT_GAMMA)


@pytest.fixture
def noiseless_cfg(tmp_path):
    return RunConfig(sigma=0.0, trials=0, output_dir=str(tmp_path / "out"))


@pytest.fixture
def default_drive(noiseless_cfg):
    return build_drive(noiseless_cfg)


@pytest.fixture
def noiseless_dataset(noiseless_cfg, default_table, default_drive):
    return theory_dataset(noiseless_cfg, default_table, default_drive)
