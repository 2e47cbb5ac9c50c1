import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stochhf.basis import orbital_energies  # noqa: E402
from stochhf.coulomb import coulomb_matrix  # noqa: E402
from stochhf.decomp import decompose_interaction  # noqa: E402
from stochhf.ensemble import InitialRecipe, initial_stream, sample_initial_orbitals  # noqa: E402
from stochhf.exact import build_hamiltonian, embed_determinant  # noqa: E402


@pytest.fixture(scope="session")
def V2():
    return coulomb_matrix(2, 2.0)


@pytest.fixture(scope="session")
def decomp2(V2):
    return decompose_interaction(V2)


@pytest.fixture(scope="session")
def energies2():
    return orbital_energies(2, 2.0)


@pytest.fixture(scope="session")
def initial2():
    return sample_initial_orbitals(InitialRecipe(), 2, initial_stream(0))


@pytest.fixture(scope="session")
def H2():
    return build_hamiltonian(2, 2.0)


@pytest.fixture(scope="session")
def psi2(H2, initial2):
    return embed_determinant(initial2.orbitals, initial2.beta, H2.basis)


def random_orbitals(rng, N, K, nb=2):
    x = rng.standard_normal((N, nb, K)) + 1j * rng.standard_normal((N, nb, K))
    return x / np.linalg.norm(x.reshape(N, -1), axis=1)[:, None, None]


def pytest_terminal_summary(terminalreporter):
    import _acceptance_log
    if _acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_acceptance_log.LINES):
            terminalreporter.write_line(_acceptance_log.LINES[n])
