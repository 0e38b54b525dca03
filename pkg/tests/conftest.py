import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from meanforce.operators import tensor_product  # noqa: E402


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_density(rng, d, rank=None):
    a = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    r = a @ a.conj().T
    return r / np.trace(r).real


def env_commuting_coupling(rng, h_e, d_s, scale=0.3):
    """``sum_g A_g x |g><g|`` in the eigenbasis of ``h_e``."""
    _, v = np.linalg.eigh(h_e)
    out = np.zeros((d_s * h_e.shape[0],) * 2, dtype=complex)
    for g in range(h_e.shape[0]):
        proj = np.outer(v[:, g], v[:, g].conj())
        out += tensor_product(random_hermitian(rng, d_s, scale), proj)
    return out


def sys_commuting_coupling(rng, h_s, d_e, scale=0.3):
    """``sum_i |i><i| x B_i`` in the eigenbasis of ``h_s``."""
    _, v = np.linalg.eigh(h_s)
    out = np.zeros((h_s.shape[0] * d_e,) * 2, dtype=complex)
    for i in range(h_s.shape[0]):
        proj = np.outer(v[:, i], v[:, i].conj())
        out += tensor_product(proj, random_hermitian(rng, d_e, scale))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
