import numpy as np
import pytest

from terrascout import mission
from terrascout.terrain import ames_testbed_field

# Table A1-style ground truth used across the suite
AMES_VALUES = np.array(
    [
        [4.17, 1.16, 0.31, 0.74],
        [4.93, 1.04, 0.30, 0.28],
        [4.46, 5.75, 1.41, 1.65],
        [1.23, 4.04, 3.93, 1.71],
        [0.35, 0.35, 5.98, 4.87],
        [1.03, 0.56, 8.38, 4.16],
    ]
)


@pytest.fixture(scope="session")
def ames_field():
    return ames_testbed_field()


@pytest.fixture(scope="session")
def ames_artifacts(tmp_path_factory):
    out = tmp_path_factory.mktemp("ames_run")
    config = mission.preset_config("ames")
    return mission.run_mission(config, out_dir=out), out


@pytest.fixture(scope="session")
def whitesands_artifacts(tmp_path_factory):
    out = tmp_path_factory.mktemp("whitesands_run")
    config = mission.preset_config("whitesands")
    return mission.run_mission(config, out_dir=out), out
