import numpy as np
import pytest

from memlqr.galerkin import Basis, assemble
from memlqr.model import InputShape, ModelParams
from memlqr.riccati import representers, solve_system


@pytest.fixture(scope="session")
def ex1_params():
    return ModelParams(eta=0.01, kappa=0.01, omega=1.0, q_weight=2.0, r_matrix=[[1.0]])


@pytest.fixture(scope="session")
def ex1_shapes():
    return [InputShape.box((0.1, 0.8), amplitude=10.0)]


@pytest.fixture(scope="session")
def ex2_params():
    return ModelParams(eta=0.005, kappa=0.001, omega=0.5, q_weight=1.0, r_matrix=np.eye(2))


@pytest.fixture(scope="session")
def ex2_shapes():
    return [
        InputShape.box((0.1, 0.3), (0.1, 0.5), amplitude=5.0),
        InputShape.box((0.5, 0.7), (0.5, 0.9), amplitude=10.0),
    ]


@pytest.fixture(scope="session")
def solved_hat50(ex1_params, ex1_shapes):
    system = assemble(Basis("Hat1D", 50), ex1_params, ex1_shapes)
    sol = solve_system(system)
    return system, sol, representers(sol, system)


@pytest.fixture(scope="session")
def solved_sine10(ex2_params, ex2_shapes):
    system = assemble(Basis("Sine2D", 10), ex2_params, ex2_shapes)
    sol = solve_system(system)
    return system, sol, representers(sol, system)


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
