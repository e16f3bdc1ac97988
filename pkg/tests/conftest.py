import time

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Time an acceptance criterion against its budget and log a PASS/FAIL line."""

    class _Criterion:
        def __init__(self):
            self.number = None

        def __call__(self, number, title, budget_s):
            self.number, self.title, self.budget = number, title, budget_s
            self.t0 = time.perf_counter()
            return self

        def elapsed(self):
            return time.perf_counter() - self.t0

    c = _Criterion()
    yield c
    if c.number is None:
        return
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    ACCEPTANCE_LINES.append(
        f"[{'PASS' if ok else 'FAIL'}] criterion {c.number:>2}: {c.title} "
        f"({c.elapsed():.2f} s, budget {c.budget:g} s)"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
