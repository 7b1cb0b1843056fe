"""Prints a per-criterion PASS/FAIL table after the acceptance tests run."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, list[bool]] = {}
    for category, reports in terminalreporter.stats.items():
        for report in reports:
            match = _CRITERION.search(getattr(report, "nodeid", ""))
            if not match:
                continue
            num = int(match.group(1))
            when = getattr(report, "when", "call")
            if when == "call":
                outcomes.setdefault(num, []).append(category == "passed")
            elif category in ("error", "skipped"):
                # a test that never ran cannot vouch for its criterion
                outcomes.setdefault(num, []).append(False)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        verdict = "PASS" if all(outcomes[num]) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}")
