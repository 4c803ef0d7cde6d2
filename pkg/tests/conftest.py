import numpy as np
import pytest
from hypothesis import settings

from fermi_nls.grid import build_grid

settings.register_profile("lab", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def grid2():
    return build_grid(2, 8)


@pytest.fixture(scope="session")
def grid2_16():
    return build_grid(2, 16)


@pytest.fixture(scope="session")
def grid1():
    return build_grid(1, 16)


@pytest.fixture(scope="session")
def grid3():
    return build_grid(3, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
VERDICTS: dict[int, str] = {}


@pytest.fixture(scope="session")
def verdict():
    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        VERDICTS[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])
