"""Shared fixtures plus a summary hook that prints one line per acceptance check."""

from __future__ import annotations

import numpy as np
import pytest


def mask_from_strings(rows):
    """Build a bool mask from strings of '#' (foreground) and '.' (background)."""
    return np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)


def random_mask(rng, height, width, density=0.5):
    return rng.random((height, width)) < density


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_acceptance_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results[name] = report.passed
    elif report.failed:
        _acceptance_results[name] = False


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance checks")
    for name in sorted(_acceptance_results):
        verdict = "PASS" if _acceptance_results[name] else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {verdict}: {name}")
