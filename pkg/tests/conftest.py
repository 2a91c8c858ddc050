import sys

import numpy as np
import pytest
import scipy.sparse as sp


@pytest.fixture
def rng():
    return np.random.default_rng(20140501)


def random_spd(rng, m, density=None):
    """Dense SPD matrix ``B'B + I`` (or a sparse banded SPD one if density is given)."""
    if density is None:
        B = rng.standard_normal((m, m))
        return B.T @ B + np.eye(m)
    main = 4.0 + rng.random(m)
    off = -rng.random(m - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def orthonormal_basis(rng, m, d):
    Q, _ = np.linalg.qr(rng.standard_normal((m, d)))
    return Q


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
