import functools
import shutil

import pytest

from topoinv.backend import default_solver
from topoinv.suite import resolve_spec

HAVE_SOLVER = shutil.which(default_solver()) is not None

needs_solver = pytest.mark.skipif(not HAVE_SOLVER, reason="no CHC solver on PATH")


@functools.lru_cache(maxsize=None)
def spec(name):
    return resolve_spec(name)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
