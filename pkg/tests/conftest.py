import time

import pytest

from thinlayer.config import RunConfig
from thinlayer.experiment import run_convergence

_LINES = []


class Criterion:
    """Collects named checks for one acceptance criterion and reports a single verdict."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = {}
        self.t0 = time.perf_counter()
        self.done = False

    def check(self, name, ok, detail=""):
        self.checks[name] = (bool(ok), detail)
        return bool(ok)

    def within(self, seconds):
        dt = time.perf_counter() - self.t0
        return self.check(f"runtime < {seconds:g} s", dt < seconds, f"{dt:.2f} s")

    def finish(self):
        self.done = True
        failed = [k for k, (ok, _) in self.checks.items() if not ok]
        verdict = "FAIL" if failed else "PASS"
        parts = "; ".join(f"{k}{' (' + d + ')' if d else ''}{'' if ok else ' FAILED'}"
                          for k, (ok, d) in self.checks.items())
        line = f"{verdict} criterion {self.number} [{self.title}]: {parts}"
        _LINES.append(line)
        print(line)
        assert not failed, line


@pytest.fixture
def criterion():
    made = []

    def make(number, title):
        made.append(Criterion(number, title))
        return made[-1]
    yield make
    for c in made:
        if not c.done:
            _LINES.append(f"FAIL criterion {c.number} [{c.title}]: aborted before all checks ran")


@pytest.fixture(scope="session")
def default_study():
    t0 = time.perf_counter()
    study = run_convergence(RunConfig())
    return study, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
