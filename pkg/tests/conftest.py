import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "morlie", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("morlie")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_aff3(rng, scale=1.0):
    m = np.zeros((4, 4))
    m[:3, :] = rng.normal(size=(3, 4)) * scale
    return m


def random_se3(rng, scale=1.0):
    from morlie.lie_core import hat_se3

    return hat_se3(rng.normal(size=6) * scale)


# -- acceptance report --------------------------------------------------------------

_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """record(n, ok, detail) stores one pass/fail line for the terminal summary."""

    def record(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.setdefault(n, []).append((ok, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        oks = [ok for ok, _ in _CRITERIA[n]]
        detail = "; ".join(line.split("  ", 1)[1] for _, line in _CRITERIA[n])
        terminalreporter.write_line(f"criterion {n}: {'PASS' if all(oks) else 'FAIL'}  {detail}")
