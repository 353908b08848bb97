import numpy as np
import pytest

from magcontact import surface as S

ACCEPTANCE = []


@pytest.fixture(scope="session")
def sphere():
    return S.round_sphere()


@pytest.fixture(scope="session")
def oblate():
    return S.ellipsoid(2.0, 1.0)


@pytest.fixture(scope="session")
def prolate():
    return S.ellipsoid(1.0, 3.0)


@pytest.fixture(scope="session")
def thin():
    return S.ellipsoid(1.0, 6.0)


@pytest.fixture(scope="session")
def stretched():
    return S.stretched_sphere(0.3, 0.05, C=10.0)


@pytest.fixture(scope="session")
def dip():
    return S.dip_profile(0.1, 0.5)


@pytest.fixture(scope="session")
def bump(sphere):
    return S.cosine_strength(sphere, 0.2)


@pytest.fixture
def report():
    """Record one acceptance line; printed again in the terminal summary."""
    def rec(n, ok, detail):
        line = f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        ACCEPTANCE.append((n, line))
        return ok
    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)


def wrap(a):
    return np.angle(np.exp(1j * np.asarray(a)))
