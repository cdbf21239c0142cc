import numpy as np
import pytest
from skimage import data

# criterion -> (passed, detail); filled by the acceptance tests
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def astronaut():
    """512 x 512 RGB natural image shipped with scikit-image."""
    return np.ascontiguousarray(data.astronaut())


@pytest.fixture(scope="session")
def astronaut_small(astronaut):
    return np.ascontiguousarray(astronaut[64:192, 160:288])


@pytest.fixture
def verdict():
    def record(criterion: str, ok: bool, detail: str):
        ACCEPTANCE[criterion] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
