import re

import numpy as np
import pytest

from wavetomo.grid import SpaceTimeGrid


@pytest.fixture
def unit_grid():
    """Unit Q, coarse enough to be quick, CFL-safe."""
    return SpaceTimeGrid(1.0, (1.0, 1.0), 49, (33, 33))


@pytest.fixture
def small_grid():
    return SpaceTimeGrid(0.5, (0.5, 0.5), 49, (33, 33))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed after the run."""
    import time

    start = time.perf_counter()

    def record(key, ok, detail, limit_s=None):
        elapsed = time.perf_counter() - start
        in_time = limit_s is None or elapsed < limit_s
        budget = f" (limit {limit_s:g} s)" if limit_s is not None else ""
        verdict = "PASS" if ok and in_time else "FAIL"
        ACCEPTANCE_LINES.append(f"{key}: {verdict} | {detail} | {elapsed:.1f} s{budget}")
        return ok and in_time

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(re.match(r"C(\d+)", s).group(1)), s)):
            terminalreporter.write_line(line)
