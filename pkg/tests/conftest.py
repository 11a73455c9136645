import numpy as np
import pytest

from tumor_control.forward import initial_condition
from tumor_control.model import Grid, ModelParams, TimeMesh
from tumor_control.problem import ControlProblem

K_DEFAULT = 2.5e-9 * 86400.0


def hourly_dosing(mesh, rate=0.00014 * 86400.0):
    t = mesh.times[:-1]
    return np.where(np.mod(t + 1e-9, 1.0) < 1.0 / 24.0, rate, 0.0)


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def small_problem():
    """15x15 grid, hourly steps: fast enough for per-test forward/adjoint runs."""
    p = ModelParams()
    grid = Grid.uniform(15, 3.0, K_DEFAULT)
    mesh = TimeMesh(28.0, 672)
    return ControlProblem(p, grid, mesh, initial_condition(grid))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report(label, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
