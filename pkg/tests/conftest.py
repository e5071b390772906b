"""Shared fixtures: tori, corpus bundles and cached solver runs."""

import numpy as np
import pytest

from affine_ymh.geometry import make_torus
from affine_ymh.hermitian import MetricField
from affine_ymh.scenarios import diagonal, diagonal_kernel, flat_unitary, jordan, rank1
from affine_ymh.solver import SolverOptions, continuity_solve

ACCEPTANCE_LINES: dict = {}


def bumpy_metric(torus) -> MetricField:
    """A smooth non-constant, non-diagonal starting metric."""
    x, y = torus.points
    H = np.zeros(torus.shape + (2, 2), dtype=complex)
    H[..., 0, 0] = 2 + 0.3 * np.sin(2 * np.pi * x)
    H[..., 1, 1] = 1 + 0.2 * np.cos(2 * np.pi * y)
    H[..., 0, 1] = 0.5j + 0.1 * np.sin(2 * np.pi * (x + y))
    H[..., 1, 0] = np.conj(H[..., 0, 1])
    return MetricField.from_array(H)


def record_acceptance(number: int, passed: bool, detail: str):
    """Store the one-line verdict for a criterion and echo it."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture(scope="session")
def flat_torus():
    return make_torus(2, 32, np.eye(2))


@pytest.fixture(scope="session")
def flat_runs(flat_torus):
    """Continuity runs shared between the solver tests and the acceptance suite."""
    torus = flat_torus
    return {
        "flat_unitary": continuity_solve(flat_unitary(), torus, SolverOptions()),
        "flat_unitary_bumpy": continuity_solve(flat_unitary(), torus, SolverOptions(), bumpy_metric(torus)),
        "diagonal": continuity_solve(diagonal(), torus, SolverOptions()),
        "diagonal_bumpy": continuity_solve(diagonal(), torus, SolverOptions(), bumpy_metric(torus)),
        "jordan": continuity_solve(jordan(), torus, SolverOptions()),
    }


@pytest.fixture(scope="session")
def kernel_run(flat_torus):
    return continuity_solve(diagonal_kernel(), flat_torus, SolverOptions(), bumpy_metric(flat_torus))


@pytest.fixture(scope="session")
def rank1_runs(flat_torus):
    torus = flat_torus
    x, y = torus.points
    starts = {
        "identity": None,
        "bumpy": MetricField.from_array((np.exp(0.3 * np.sin(2 * np.pi * x) + 0.2 * np.cos(2 * np.pi * y)))[..., None, None]),
    }
    return {name: continuity_solve(rank1(), torus, SolverOptions(), H) for name, H in starts.items()}
