import numpy as np
import pytest

from optomo.opalg import make_rng


@pytest.fixture
def rng():
    return make_rng(12345)


def random_matrix(rng, r, c=None):
    c = r if c is None else c
    return rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))


def random_hermitian(rng, d, rank=None):
    rank = d if rank is None else rank
    V = random_matrix(rng, d, rank)
    w = rng.standard_normal(rank)
    return (V * w) @ V.conj().T


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.array([PAULI_I, PAULI_X, PAULI_Y, PAULI_Z])


def clifford_group_1q():
    """The 24 single-qubit Clifford unitaries modulo phase (a unitary 2-design)."""
    H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    S = np.diag([1, 1j])

    def canon(U):
        k = np.flatnonzero(np.abs(U.reshape(-1)) > 1e-9)[0]
        ph = U.reshape(-1)[k] / abs(U.reshape(-1)[k])
        return U / ph

    group = [np.eye(2, dtype=complex)]
    keys = {tuple(np.round(canon(group[0]), 8).reshape(-1))}
    frontier = list(group)
    while frontier:
        nxt = []
        for U in frontier:
            for G in (H, S):
                V = canon(G @ U)
                key = tuple(np.round(V, 8).reshape(-1))
                if key not in keys:
                    keys.add(key)
                    group.append(V)
                    nxt.append(V)
        frontier = nxt
    return np.array(group)


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, title = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
