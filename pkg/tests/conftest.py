"""Shared fixtures plus a one-line-per-criterion acceptance summary."""

import re

import numpy as np
import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)")
_acceptance: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    m = _CRITERION.search(item.name)
    if not m:
        return
    doc = (item.function.__doc__ or "").strip().splitlines()
    title = doc[0] if doc else item.name
    _acceptance[int(m.group(1))] = (report.outcome.upper(), title)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    tw = terminalreporter
    tw.section("acceptance criteria")
    for num in sorted(_acceptance):
        outcome, title = _acceptance[num]
        word = "PASS" if outcome == "PASSED" else outcome
        tw.write_line(f"  [{num:02d}] {word:6s} {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
