import numpy as np
import pytest

from fbmhd.grid import SlabGrid
from fbmhd.thermo import ThermoModel


@pytest.fixture
def eos():
    return ThermoModel()


@pytest.fixture
def liquid():
    """Stiffened closure with a zero-pressure free surface."""
    return ThermoModel(p_inf=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def small_grid():
    return SlabGrid(12, 8, 8, 8, t_final=0.3)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        title, ok, detail = RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
