"""Acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary.

Tests tagged ``@pytest.mark.criterion("3", "short name")`` may record the
quantities they measured through the ``measured`` fixture; those are printed
next to the verdict.
"""
import pytest

_RESULTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, name): acceptance criterion checked by this test")


@pytest.fixture
def measured(request):
    values = {}
    request.node._measured = values
    return values


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _RESULTS.append((mark.args[0], mark.args[1], rep.outcome, getattr(item, "_measured", {})))


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def _sort_key(cid):
    digits = "".join(ch for ch in cid if ch.isdigit())
    return int(digits or 0), cid


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, name, outcome, values in sorted(_RESULTS, key=lambda r: _sort_key(r[0])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in values.items())
        terminalreporter.write_line(f"criterion {cid} [{name}]: {verdict}" + (f"  ({extra})" if extra else ""))
