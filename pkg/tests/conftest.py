import time

SUITE_LIMIT = 300.0
_start = {}


def pytest_sessionstart(session):
    _start["t"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    elapsed = time.perf_counter() - _start.get("t", time.perf_counter())
    verdict = "PASS" if elapsed < SUITE_LIMIT else "FAIL"
    terminalreporter.write_line(f"suite wall time {elapsed:.1f} s (limit {SUITE_LIMIT:.0f} s) {verdict}")
