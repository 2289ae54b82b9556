import contextlib
import time
from ipaddress import IPv6Address

import pytest

A_LO = IPv6Address("2001:db8::a")
B_LO = IPv6Address("2001:db8::b")
B_SLAVE = IPv6Address("2001:db8::b5")

_criteria: dict[int, tuple[str, str, str]] = {}


class _Criterion:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.detail = ""


@pytest.fixture
def criterion():
    """Context manager recording one pass/fail line per acceptance criterion."""

    @contextlib.contextmanager
    def _run(number, title):
        c = _Criterion(number, title)
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield c
            status = "PASS"
        except pytest.xfail.Exception:
            status = "XFAIL"
            raise
        except pytest.skip.Exception:
            status = "SKIP"
            raise
        finally:
            elapsed = time.perf_counter() - t0
            _criteria[number] = (status, title, f"{c.detail} [{elapsed:.1f}s]".strip())

    return _run


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, title, detail = _criteria[n]
        terminalreporter.write_line(f"[{status}] {n}. {title}: {detail}")
