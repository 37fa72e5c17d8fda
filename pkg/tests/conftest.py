import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from volregime.experiment import prepare
from volregime.marketdata import compute_returns, load_prices

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def sim174():
    """166 windows of w=7: 116 train, 50 test."""
    returns = compute_returns(load_prices(DATA / "sim_index_174.csv"))
    return prepare(returns, w=7, train_fraction=0.7, q=0.8, name="sim174")


@pytest.fixture(scope="session")
def sim600():
    returns = compute_returns(load_prices(DATA / "sim_index_600.csv"))
    return prepare(returns, w=7, train_fraction=0.7, q=0.8, name="sim600")


# ---------------------------------------------------------------- acceptance log

_criteria = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        for mark in report.user_properties:
            if mark[0] == "criterion":
                outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
                _criteria.setdefault(mark[1], []).append((outcome, report.nodeid.split("::")[-1]))


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        for outcome, name in _criteria[number]:
            terminalreporter.write_line(f"criterion {number:>2}: {outcome:4}  {name}")
