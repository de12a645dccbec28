"""Momentum-resolved linear stability of the mean-field steady state.

Plane-wave fluctuations delta_rho_k around the self-consistent steady
state evolve under M_k = M_frozen + sum_alpha e^{i k . d_alpha} |V_alpha>
<w_alpha|: the frozen closed generator plus one rank-1 correction per
(coupling, probe factor) pair.  V_alpha is the derivative of the generator
with respect to that probe's scalar applied to the steady state (a
commutator for field couplings, a dissipator for rate couplings, product
rule across multi-probe couplings), and w_alpha pairs the fluctuation with
the probe operator.  Probes of +x/+y neighbors carry e^{+ik}; back-action
probes of the anchoring -x/-y cluster carry e^{-ik}; corner probes carry
the full e^{i k . d} of their diagonal offset.

The largest real part mu_k of the spectrum decides stability; trace
preservation pins one eigenvalue at zero for every k.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cmf import close_generator
from .errors import CapExceeded
from .lindblad import superoperator_matrix
from .operators import ClusterOperatorSet, ColumnOp, CouplingKind

__all__ = [
    "BlochMatrix",
    "FluctuationOperator",
    "build_bloch",
    "mu_of_k",
    "brillouin_grid",
    "spectrum_symmetry_check",
]


def brillouin_grid(ell: int, n: int = 65) -> np.ndarray:
    """n momenta spanning (-pi/ell, pi/ell), endpoints excluded, 0 included
    for odd n."""
    edge = math.pi / ell
    j = np.arange(1, n + 1)
    return -edge + j * (2 * edge) / (n + 1)


def _dissipator_dense(op: ColumnOp, rho: np.ndarray) -> np.ndarray:
    L = op.to_dense()
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def _commutator_dense(op: ColumnOp, rho: np.ndarray) -> np.ndarray:
    h = op.to_dense()
    return -1j * (h @ rho - rho @ h)


@dataclass
class BlochMatrix:
    k: tuple[float, float]
    matrix: np.ndarray
    n_terms: int

    def mu(self) -> float:
        return float(np.linalg.eigvals(self.matrix).real.max())


class FluctuationOperator:
    """Frozen generator plus offset-resolved rank-1 fluctuation terms."""

    def __init__(
        self,
        ops: ClusterOperatorSet,
        rho_ss: np.ndarray,
        prescription: str = "trace",
        include_backaction: bool = True,
        cap: int = 65536,
    ):
        dim = ops.dim
        if dim * dim > cap:
            raise CapExceeded(
                f"fluctuation matrix dimension {dim * dim} exceeds cap {cap}"
            )
        self.ops = ops
        self.prescription = prescription
        self.include_backaction = include_backaction
        self.dim = dim
        self.m_frozen = superoperator_matrix(
            close_generator(ops, rho_ss, prescription), cap=cap
        ).toarray()

        self.n_terms = 0
        blocks: dict[tuple[int, int], np.ndarray] = {}
        for b in ops.boundary:
            if (
                b.kind == CouplingKind.DISSIPATIVE_BACKACTION
                and not include_backaction
            ):
                continue
            cs = [p.op.expectation(rho_ss).real for p in b.probes]
            for i, probe in enumerate(b.probes):
                others = [c for j, c in enumerate(cs) if j != i]
                if b.kind == CouplingKind.HAMILTONIAN_FIELD:
                    pref = b.base * math.prod(others)
                    v_mat = pref * _commutator_dense(b.on_op, rho_ss)
                else:
                    if self.prescription == "trace":
                        gprime = 1.0
                        gothers = math.prod(others)
                    else:
                        gprime = 2.0 * cs[i]
                        gothers = math.prod(c * c for c in others)
                    pref = b.base * gprime * gothers
                    v_mat = pref * _dissipator_dense(b.on_op, rho_ss)
                v = v_mat.reshape(-1, order="F")
                w = probe.op.to_dense().T.reshape(-1, order="F")
                block = blocks.setdefault(
                    probe.offset, np.zeros((dim * dim, dim * dim), dtype=np.complex128)
                )
                block += np.outer(v, w)
                self.n_terms += 1
        self.offset_blocks = blocks

    def bloch(self, kx: float, ky: float) -> BlochMatrix:
        m = self.m_frozen.copy()
        for (dx, dy), block in self.offset_blocks.items():
            m += np.exp(1j * (kx * dx + ky * dy)) * block
        return BlochMatrix(k=(kx, ky), matrix=m, n_terms=self.n_terms)

    def mu(self, kx: float, ky: float) -> float:
        return self.bloch(kx, ky).mu()

    def mu_table(self, kx_grid, ky_grid, workers: int | None = None) -> np.ndarray:
        """mu over a momentum grid, parallel over k points.

        The spectra at +-k are complex conjugates, so on inversion-symmetric
        grids only half the points are diagonalized and the rest mirrored.
        """
        kx_grid = np.asarray(kx_grid, dtype=float)
        ky_grid = np.asarray(ky_grid, dtype=float)
        nx, ny = kx_grid.size, ky_grid.size
        symmetric = np.allclose(kx_grid, -kx_grid[::-1]) and np.allclose(
            ky_grid, -ky_grid[::-1]
        )
        table = np.full((ny, nx), np.nan)
        points = []
        for iy in range(ny):
            for ix in range(nx):
                if symmetric and not np.isnan(table[ny - 1 - iy, nx - 1 - ix]):
                    continue
                table[iy, ix] = np.inf  # mark as claimed
                points.append((ix, iy))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            mus = list(
                pool.map(lambda p: self.mu(kx_grid[p[0]], ky_grid[p[1]]), points)
            )
        for (ix, iy), value in zip(points, mus):
            table[iy, ix] = value
            if symmetric:
                table[ny - 1 - iy, nx - 1 - ix] = value
        return table


def build_bloch(
    rho_ss: np.ndarray,
    ops: ClusterOperatorSet,
    k: tuple[float, float],
    prescription: str = "trace",
    include_backaction: bool = True,
) -> BlochMatrix:
    fluct = FluctuationOperator(
        ops, rho_ss, prescription=prescription, include_backaction=include_backaction
    )
    return fluct.bloch(*k)


def mu_of_k(
    rho_ss: np.ndarray,
    ops: ClusterOperatorSet,
    kx_grid,
    ky_grid,
    prescription: str = "trace",
    include_backaction: bool = True,
    workers: int | None = None,
) -> np.ndarray:
    fluct = FluctuationOperator(
        ops, rho_ss, prescription=prescription, include_backaction=include_backaction
    )
    return fluct.mu_table(kx_grid, ky_grid, workers=workers)


def spectrum_symmetry_check(
    m_k: BlochMatrix | np.ndarray, m_minus_k: BlochMatrix | np.ndarray, tol: float = 1e-8
) -> bool:
    """Eigenvalues at -k must be the complex conjugates of those at +k."""
    a = m_k.matrix if isinstance(m_k, BlochMatrix) else m_k
    b = m_minus_k.matrix if isinstance(m_minus_k, BlochMatrix) else m_minus_k
    ea = np.linalg.eigvals(a)
    eb = np.linalg.eigvals(b)

    def _sorted(vals):
        order = np.lexsort((vals.imag.round(10), vals.real.round(10)))
        return vals[order]

    return bool(np.allclose(_sorted(np.conj(ea)), _sorted(eb), atol=tol))
