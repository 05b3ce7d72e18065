import numpy as np
import pytest

from coevolab import kernels
from coevolab.domains.catalog import (UserProfile, generate_synthetic_users, load_catalog,
                                      micro_catalog_path)


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def micro_catalog():
    return load_catalog(micro_catalog_path())


@pytest.fixture(scope="session")
def users(catalog):
    return generate_synthetic_users(30, 11, catalog)


@pytest.fixture(scope="session")
def table_user(catalog):
    """2103 kcal/day already adjusted for weight loss (701 per meal), 90-minute sessions."""
    prefs = {c: 0.6 for c in ("vegetable", "fruit", "grain", "meat", "fish", "dairy", "legume", "nut", "egg", "other")}
    ex = {e.id: 0.5 for e in catalog.exercises}
    return UserProfile("table1", 2103.0 / 0.85, "lose_weight", False, False, 90.0, prefs, ex)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    prev = kernels.backend()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(prev)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_report():
    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
