import numpy as np
import pytest

from cmspin.lattice import SpinConfiguration
from cmspin.spectral import TrigPoly


def random_spins(N, seed):
    rng = np.random.default_rng(seed)
    return SpinConfiguration.normalized(rng.standard_normal((N, 3)))


def random_pol(n, seed, dim=3, real=True):
    """Random element of Pol_n; real-valued when ``real``."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((2 * n + 1, dim)) + 1j * rng.standard_normal((2 * n + 1, dim))
    if real:
        c = 0.5 * (c + c[::-1].conj())
    return TrigPoly(c)


def direct_halfwave(values):
    """Pair-sum definition of the lattice half-Laplacian."""
    v = np.asarray(values)
    N = v.shape[0]
    z = np.exp(2j * np.pi * np.arange(N) / N)
    out = np.zeros_like(v, dtype=complex)
    for k in range(N):
        for l in range(N):
            if l != k:
                out[k] += (v[k] - v[l]) / abs(z[k] - z[l]) ** 2
    return 2.0 / N * out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
