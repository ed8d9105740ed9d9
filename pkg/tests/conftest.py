import numpy as np
import pytest
from hypothesis import settings

from openbattery.exact import assemble_hamiltonian, ground_state_lanczos
from openbattery.model import ModelParams, closed_eigensystem, discretize_bath
from openbattery.protocol import charge, charging_unitary

settings.register_profile("repo", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("repo")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def random_unitary(rng, n=4):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state_vector(rng, dim):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def small_setup():
    """N=4, n=3 compound at g=0.6: Hamiltonian, ground state and charged state."""
    p = ModelParams(g=0.6, n_modes=4, fock_cutoff=3)
    H = assemble_hamiltonian(p, discretize_bath(p, "equal_weight"))
    e_gs, gs = ground_state_lanczos(H)
    u = charging_unitary(closed_eigensystem(p))
    return {"params": p, "H": H, "e_gs": e_gs, "ground": gs, "u": u, "charged": charge(gs, u)}


@pytest.fixture(scope="session")
def desk_setup():
    """N=6, n=4 compound at g=0.6 (equal-weight bath)."""
    p = ModelParams(g=0.6, n_modes=6, fock_cutoff=4)
    bath = discretize_bath(p, "equal_weight")
    H = assemble_hamiltonian(p, bath)
    e_gs, gs = ground_state_lanczos(H)
    u = charging_unitary(closed_eigensystem(p))
    return {"params": p, "bath": bath, "H": H, "e_gs": e_gs, "ground": gs, "u": u, "charged": charge(gs, u)}
