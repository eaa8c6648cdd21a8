import numpy as np
import pytest

from gpe_ground.blocktri import BlockTridiag
from gpe_ground.grid import DiscreteGpe


def random_block_tridiag(rng, m, p, spd=True, m_matrix=False):
    """Random symmetric block tridiagonal matrix, diagonally dominant when ``spd``."""
    diag = rng.standard_normal((m, p, p))
    diag = 0.5 * (diag + diag.transpose(0, 2, 1))
    off = rng.standard_normal((m - 1, p, p))
    if m_matrix:
        diag = -np.abs(diag)
        off = -np.abs(off)
    M = BlockTridiag(diag, off)
    if spd:
        dense = M.to_dense()
        rowsum = np.abs(dense).sum(axis=1) - np.abs(np.diag(dense))
        idx = np.arange(p)
        diag = diag.copy()
        diag[:, idx, idx] = rowsum.reshape(m, p) + 1.0 + rng.random((m, p))
        M = BlockTridiag(diag, off, m_matrix=m_matrix)
    return M


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sym2():
    """B = [[2, -1], [-1, 2]], beta = 1: exact ground state (1/sqrt2, 1/sqrt2), lambda = 1.5."""
    return DiscreteGpe.from_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]), 1.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
