"""Shared fixtures and independent dense-matrix oracles.

The helpers here build operators by explicit Kronecker products of 2x2
matrices, deliberately bypassing the package's compressed column
construction so tests compare two independent routes.
"""

import numpy as np
import pytest

# Basis: index bit 1 = spin-up, |0> = down, |1> = up, site 0 least significant.
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SZ = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SP = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # sigma^+ : down -> up
SM = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
PU = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
PD = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


def kron_op(n_sites: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    """Embed single-site operators at the given sites (site 0 = LSB)."""
    out = np.array([[1.0 + 0j]])
    for site in range(n_sites):
        out = np.kron(ops.get(site, ID2), out)
    return out


def majority_up_dense(n_sites: int, sites: tuple[int, int, int]) -> np.ndarray:
    """P_up = (2 + sum sigma^z - prod sigma^z) / 4 on three sites."""
    s = [kron_op(n_sites, {j: SZ}) for j in sites]
    prod = s[0] @ s[1] @ s[2]
    return (2 * np.eye(2**n_sites) + s[0] + s[1] + s[2] - prod) / 4.0


def dissipator_dense(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def basis_state(n_sites: int, up_sites) -> np.ndarray:
    """Pure product density matrix with the listed sites up, rest down."""
    idx = 0
    for s in up_sites:
        idx |= 1 << s
    dim = 2**n_sites
    rho = np.zeros((dim, dim), dtype=complex)
    rho[idx, idx] = 1.0
    return rho


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
