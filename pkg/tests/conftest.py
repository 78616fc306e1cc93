import numpy as np
import pytest

from sbcstab import _backend, _pycore
from sbcstab.orbits import solve_collinear, solve_planar


@pytest.fixture(scope="session")
def orbit_m1():
    return solve_collinear(1.0)


@pytest.fixture(scope="session")
def planar8():
    return solve_planar(8.0)


@pytest.fixture
def pure_python(monkeypatch):
    """Route built-in systems through the pure-Python kernel."""
    monkeypatch.setattr(_backend, "kernel", _pycore)
    monkeypatch.setattr(_backend, "BACKEND", "python")


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Record named checks for one criterion and print a summary line.

    ``check(label, ok, detail)`` stores a sub-result; at teardown the
    criterion line is added to the terminal summary.  Tests still assert
    on every sub-result themselves.
    """
    checks = []

    def check(label, ok, detail=""):
        checks.append((label, bool(ok), detail))
        return bool(ok)

    yield check
    status = "PASS" if checks and all(ok for _, ok, _ in checks) else "FAIL"
    parts = "; ".join(f"{label}={'ok' if ok else 'FAIL'} ({detail})" for label, ok, detail in checks)
    _ACCEPTANCE.append(f"{status}  {request.node.name}: {parts}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
