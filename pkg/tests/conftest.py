"""Pytest wiring: prints the acceptance-criteria verdict block after a run."""

import re

import pytest

import helpers

_CRITERION = re.compile(r"test_c(\d{2})_")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION.match(item.name)
    if match and report.when == "call":
        helpers.ACCEPTANCE_OUTCOME[int(match.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not helpers.ACCEPTANCE_OUTCOME:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(helpers.ACCEPTANCE_OUTCOME):
        outcome = helpers.ACCEPTANCE_OUTCOME[criterion]
        verdict = "PASS" if outcome == "passed" else outcome.upper()
        detail = helpers.ACCEPTANCE_DETAIL.get(criterion, "")
        line = f"criterion {criterion}: {verdict}"
        if detail:
            line += f"  {detail}"
        terminalreporter.write_line(line)
