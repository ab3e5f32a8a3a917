from __future__ import annotations

import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        label = marker.kwargs.get("label", item.name)
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        print(f"\n[acceptance] {label}: {status}", flush=True)
