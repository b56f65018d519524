import pytest

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or rep.failed:
        detail = getattr(item, "criterion_detail", "")
        _criteria[mark.args[0]] = (mark.args[1], rep.outcome, detail)


@pytest.fixture
def detail(request):
    """Call with a short summary string; it is shown next to the criterion verdict."""

    def record(text: str) -> None:
        request.node.criterion_detail = text

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_criteria):
        title, outcome, det = _criteria[n]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {n:>2}: {verdict}  {title}"
        if det:
            line += f"  [{det}]"
        terminalreporter.write_line(line)
