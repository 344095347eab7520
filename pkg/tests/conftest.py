import numpy as np
import pytest

from doublecal.frame import Frame

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_frame(
    rng: np.random.Generator,
    n_total: int = 60,
    n_b: int = 45,
    n_resp: int = 25,
    k: int = 1,
    m: int = 1,
    linear: bool = False,
) -> Frame:
    """Frame with intercepted bases and scattered (not prefix) membership."""
    z = rng.normal(1.0, 1.0, size=(n_total, m))
    x = rng.normal(1.0, 1.0, size=(n_total, k)) + 0.5 * z[:, :1]
    y = 2.0 + x.sum(axis=1) + z.sum(axis=1)
    if not linear:
        y = y + rng.normal(0.0, 1.0, size=n_total)
    order = rng.permutation(n_total)
    in_b = np.zeros(n_total, dtype=bool)
    in_b[order[:n_b]] = True
    r = np.zeros(n_total, dtype=bool)
    r[order[:n_resp]] = True
    return Frame.from_arrays(y=y, z=z, x=x, in_b=in_b, r=r, with_intercept=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_frame(rng):
    return random_frame(rng)
