"""Acceptance bookkeeping: one PASS / FAIL / NOT RUN line per criterion in the summary."""

import pytest

_details: dict[int, list[str]] = {}
_outcomes: dict[int, tuple[str, str]] = {}


@pytest.fixture
def note(request):
    """``note("...")`` attaches a measured value to the current criterion's summary line."""
    marker = request.node.get_closest_marker("criterion")
    number = marker.args[0] if marker else 0

    def add(text):
        _details.setdefault(number, []).append(text)
        print(text)
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.skipped:
        reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
        _outcomes[number] = ("NOT RUN", f"{title} ({reason.removeprefix('Skipped: ')})")
    elif rep.when == "call":
        _outcomes[number] = ("PASS" if rep.passed else "FAIL", title)
    elif rep.failed:
        _outcomes[number] = ("FAIL", f"{title} (error in {rep.when})")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, title = _outcomes[number]
        line = f"criterion {number:2d}: {status:7s} {title}"
        details = _details.get(number)
        if details:
            line += " | " + "; ".join(details)
        terminalreporter.write_line(line)
