import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sgeig import GpcBasis, SGEigenState, SGProblem, synth_random_pencil  # noqa: E402


def random_state(problem, mode, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    n_x, n_xi = problem.n_x, problem.n_xi
    VR = scale * rng.standard_normal((n_x, n_xi))
    lR = scale * rng.standard_normal(n_xi)
    if mode == "real":
        return SGEigenState(VR, lR, mode="real")
    return SGEigenState(VR, lR, scale * rng.standard_normal((n_x, n_xi)),
                        scale * rng.standard_normal(n_xi), "complex")


def pencil_problem(n_x=12, family="legendre", m_xi=2, p=2, n_nu=None, rightmost=-1.0 + 2.0j,
                   cov=0.05, seed=0):
    A = synth_random_pencil(n_x, family, m_xi, p, n_nu, rightmost, cov, seed)
    return SGProblem(A, GpcBasis(family, m_xi, p))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
