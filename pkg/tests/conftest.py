import numpy as np
import pytest

from biotfem.assemble import MaterialParameters, assemble_operators
from biotfem.mesh import unit_square
from biotfem.space import TANGENTIAL_DIRICHLET, BcSpec, build_system


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_ops(level=2, k=1, bc=None, params=None):
    sys = build_system(unit_square(level), k, bc or BcSpec(displacement_mode=TANGENTIAL_DIRICHLET))
    return sys, assemble_operators(sys, params or MaterialParameters())


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line; all lines are printed in the terminal summary."""

    def record(label, passed, detail=""):
        line = f"{label}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
