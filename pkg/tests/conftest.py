import csv
from pathlib import Path

import pytest

from spmbench.params import NOMINAL_PARAMETERS
from spmbench.scenarios import BaseSeriesCache

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def truth():
    return NOMINAL_PARAMETERS


@pytest.fixture(scope="session")
def base_cache():
    """Ground-truth base profiles, simulated once per test session."""
    return BaseSeriesCache(NOMINAL_PARAMETERS)


@pytest.fixture(scope="session")
def reference_scenarios():
    with open(DATA / "reference_scenarios.csv") as fh:
        return {int(r["scenario"]): (tuple(r["members"].split(";")), float(r["duration_h"]))
                for r in csv.DictReader(fh)}


@pytest.fixture(scope="session")
def published_metrics_path():
    return DATA / "published_metrics.csv"


@pytest.fixture(scope="session")
def published_cost():
    with open(DATA / "published_cost.csv") as fh:
        return {int(r.pop("case")): {k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)}


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number, ok, detail, seconds):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.1f} s]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
