import pytest

from dcmicrogrid.engine import run
from dcmicrogrid.presets import CASES, case_preset
from dcmicrogrid.pv_array import calibrated_params


@pytest.fixture(scope="session")
def params():
    return calibrated_params(165e3)


@pytest.fixture(scope="session")
def preset_runs():
    return {n: run(case_preset(n)) for n in CASES}
