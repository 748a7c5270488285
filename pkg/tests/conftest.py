"""Shared fixtures and the acceptance-criteria reporter.

Acceptance tests register a one-line verdict each; the terminal summary
prints them so every criterion shows an explicit pass/fail line."""

import pytest

from stepprover.toyenv import generate_corpus

_ACCEPTANCE: dict[str, tuple[str, str]] = {}  # key -> (description, nodeid)
_OUTCOMES: dict[str, str] = {}


def register_criterion(key: str, description: str) -> None:
    _ACCEPTANCE[key] = (description, "")


@pytest.fixture(scope="session")
def corpus200():
    """The 200-theorem toy corpus every corpus-level criterion runs on."""
    return generate_corpus(42, 200, max_value=8)


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    for key in list(_ACCEPTANCE):
        if name.startswith(f"test_{key.lower()}_"):
            current = _OUTCOMES.get(key)
            if report.outcome == "failed" or current == "FAIL":
                _OUTCOMES[key] = "FAIL"
            elif report.outcome == "skipped" and current is None:
                _OUTCOMES[key] = "SKIP"
            elif current is None:
                _OUTCOMES[key] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_OUTCOMES):
        description = _ACCEPTANCE[key][0]
        terminalreporter.write_line(f"[{_OUTCOMES[key]}] {key}: {description}")
