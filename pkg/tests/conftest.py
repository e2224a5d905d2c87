import pytest

_CRITERIA: dict[int, dict[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    tests = _CRITERIA.setdefault(marker.args[0], {})
    if rep.when == "call" or not rep.passed:
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        if tests.get(item.name) in (None, "PASS"):
            tests[item.name] = status


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        tests = _CRITERIA[k]
        bad = [n for n, s in tests.items() if s != "PASS"]
        status = "PASS" if not bad else ("SKIP" if all(tests[n] == "SKIP" for n in bad) else "FAIL")
        detail = f"{len(tests) - len(bad)}/{len(tests)} tests"
        if bad:
            detail += ": " + ", ".join(f"{n} {tests[n]}" for n in bad)
        terminalreporter.write_line(f"criterion {k:>2}: {status}  ({detail})")
