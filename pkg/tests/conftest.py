import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, p, scale=1.0):
    a = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
    return scale * (a + a.conj().T) / 2


def random_density(rng, p):
    a = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
    rho = a @ a.conj().T + 0.1 * np.eye(p)
    return rho / np.trace(rho).real
