"""Shared pytest fixtures and the acceptance-line reporter."""

import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1729)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one PASS/FAIL line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or item.module.__name__ != "test_acceptance":
        return
    label = getattr(item.function, "_criterion", None)
    if label:
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {label}: {verdict}", flush=True)
