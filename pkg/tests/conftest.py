import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

from acceptance_log import LINES  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(LINES):
        terminalreporter.write_line(LINES[k])


@pytest.fixture(scope="session")
def fluid2():
    from jetvar.models import build

    return build("charged_fluid", 2)


@pytest.fixture(scope="session")
def fluid3():
    from jetvar.models import build

    return build("charged_fluid", 3)
