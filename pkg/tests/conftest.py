import numpy as np
import pytest

_REPORT = []


def random_ket(rng, dim=4):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(rng, dim=2):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, rank=None):
    """Random mixture of pure states with Dirichlet weights."""
    rank = rank or int(rng.integers(1, 5))
    kets = [random_ket(rng) for _ in range(rank)]
    w = rng.dirichlet(np.ones(rank))
    return sum(p * np.outer(k, k.conj()) for p, k in zip(w, kets))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""
    def record(name, passed, detail=""):
        _REPORT.append(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip())
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
