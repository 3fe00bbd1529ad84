"""Collects the acceptance verdicts and prints them after the run."""

import pytest

_VERDICTS: list[tuple[str, bool, str]] = []


class Criterion:
    def __init__(self, label: str):
        self.label = label
        self.detail = ""

    def check(self, ok: bool, detail: str = "") -> None:
        self.detail = detail
        _VERDICTS.append((self.label, bool(ok), detail))
        assert ok, f"{self.label}: {detail}"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    return Criterion(marker.args[0] if marker else request.node.name)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
