import pytest

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        _ACCEPTANCE[number] = (title, rep.outcome, rep.duration, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcome, duration, detail = _ACCEPTANCE[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{verdict}] criterion {number}: {title} ({duration:.1f}s)"
        if detail:
            line += f" | {detail}"
        tr.write_line(line)
