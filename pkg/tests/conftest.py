import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from discrete_ainfty.complex import CATALOGUE  # noqa: E402


@pytest.fixture(scope="session")
def disc():
    return CATALOGUE["2-disc"]()


@pytest.fixture(scope="session")
def star():
    return CATALOGUE["star"]()


@pytest.fixture(scope="session")
def link():
    return CATALOGUE["1-simplex"]()


@pytest.fixture(scope="session")
def tetra():
    return CATALOGUE["3-simplex"]()


@pytest.fixture(scope="session")
def sphere():
    return CATALOGUE["sphere"]()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.result_line(n))
