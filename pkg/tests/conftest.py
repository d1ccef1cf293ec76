import time
from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Context manager that times a block and logs one PASS/FAIL line for it."""
    log = request.config.stash.setdefault(_LINES, [])

    @contextmanager
    def run(label: str, budget: float):
        notes: list[str] = []
        t0 = time.perf_counter()
        try:
            yield notes
            elapsed = time.perf_counter() - t0
            notes.append(f"{elapsed:.2f}s (limit {budget:g}s)")
            assert elapsed < budget, f"took {elapsed:.2f}s, limit {budget:g}s"
        except AssertionError as exc:
            reason = str(exc).splitlines()[0] if str(exc) else "assertion failed"
            line = f"criterion {label}: FAIL  {'; '.join(notes + [reason])}"
            log.append(line)
            print(line)
            raise
        line = f"criterion {label}: PASS  {'; '.join(notes)}"
        log.append(line)
        print(line)

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
