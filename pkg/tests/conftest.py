"""Shared pytest hooks.

The acceptance module doubles as a human-readable checklist: every test
named ``test_criterion_*`` gets one printed pass/fail line, routed
through the terminal reporter so capture settings cannot swallow it.
"""

from __future__ import annotations

_config = None


def pytest_configure(config) -> None:
    global _config
    _config = config


def pytest_runtest_logreport(report) -> None:
    if report.when != "call":
        return
    name = report.location[2]
    if "test_criterion_" not in name:
        return
    verdict = "PASS" if report.passed else "FAIL"
    line = f"[acceptance] {name}: {verdict}"
    # the terminal reporter registers after conftest configure, so look
    # it up per report rather than once
    reporter = None
    if _config is not None:
        reporter = _config.pluginmanager.get_plugin("terminalreporter")
    if reporter is None:
        print(line, flush=True)
    else:
        reporter.write_line(line)
