import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from conformal_lab.ifs import validate_ifs  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

C3_MAPS = ("x/3", "x/3 + 2/3")
Q_MAPS = ("0.1*x^2+0.3*x+0.05", "0.1*x^2+0.3*x+0.55")

# expressions used by the jet and enclosure property tests
CORPUS = (
    "x/3", "x/3 + 2/3", "x^2", "x/(2+x)", "0.1*x^2+0.3*x+0.05", "0.1*x^2+0.3*x+0.55",
    "(x+1)/(x+3)", "0.5*x^3 - 0.2*x + 0.4", "1/(1+x^2)", "(2*x-1)^4/8 + 0.1",
    "-x/4 + 0.5", "x*(1-x)/2 + 0.25", "(3 + x)/(5 + 2*x)", "0.3*x^5 + 0.1",
)


@pytest.fixture(scope="session")
def c3():
    return validate_ifs(C3_MAPS, (0.5, 0.5))


@pytest.fixture(scope="session")
def q():
    return validate_ifs(Q_MAPS, (0.5, 0.5))


@pytest.fixture(scope="session")
def half_pair():
    return validate_ifs(("x/2", "x/2 + 1/2"), (0.5, 0.5))


@pytest.fixture(scope="session")
def moebius():
    return validate_ifs(("x/(2+x)",), (1.0,))


@pytest.fixture(scope="session")
def oracle():
    import oracle as o
    return o.load()


# acceptance results, one line per criterion, shown after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
