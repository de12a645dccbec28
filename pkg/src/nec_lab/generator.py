"""Packing of cluster operators into flat arrays for the generator kernel.

The mean-field generator of a cluster is fully described by static
on-cluster rows plus boundary rows whose coefficients multiply products of
probe expectations evaluated on neighbor states.  Probes are deduplicated
across couplings; each unique (operator, neighbor offset) pair becomes one
row of the probe arrays and one scalar per cell in the closure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .errors import NegativeRate
from .operators import (
    BoundaryCoupling,
    ClusterOperatorSet,
    ColumnOp,
    CouplingKind,
    sz_diagonal,
)

MAX_PROBES = 4

PRESCRIPTIONS = ("trace", "factorized")


def _require_real(op: ColumnOp, what: str) -> np.ndarray:
    if np.max(np.abs(op.amp.imag)) > 0:
        raise ValueError(f"{what} has complex amplitudes; kernel packing expects real ops")
    return op.amp.real.copy()


@dataclass
class PackedGenerator:
    """Kernel-ready arrays for one cluster generator.

    Row layout: the first ``n_h_static`` Hamiltonian rows and
    ``n_c_static`` channel rows are on-cluster terms with fixed
    coefficients (probe index -1); the remaining rows correspond one-to-one
    to ``field_couplings`` / ``rate_couplings``.
    """

    ops: ClusterOperatorSet
    prescription: str

    offsets: list[tuple[int, int]]
    probe_keys: list[tuple]
    probe_tgt: np.ndarray
    probe_amp: np.ndarray
    probe_slot: np.ndarray
    probe_ops: list[ColumnOp]

    h_tgt: np.ndarray
    h_amp: np.ndarray
    h_base: np.ndarray
    h_pidx: np.ndarray
    n_h_static: int
    field_couplings: list[BoundaryCoupling]
    field_pidx: list[list[int]]

    c_tgt: np.ndarray
    c_amp: np.ndarray
    c_absq: np.ndarray
    c_base: np.ndarray
    c_pidx: np.ndarray
    n_c_static: int
    rate_couplings: list[BoundaryCoupling]
    rate_pidx: list[list[int]]

    sz_diag: np.ndarray

    @property
    def dim(self) -> int:
        return self.ops.dim

    @property
    def ell(self) -> int:
        return self.ops.ell

    @property
    def n_probes(self) -> int:
        return len(self.probe_keys)

    def self_neighbors(self) -> np.ndarray:
        """Neighbor table of the translationally invariant single cluster."""
        return np.zeros((1, max(len(self.offsets), 1)), dtype=np.int64)

    def workspace(self, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
        out = np.empty((n_cells, self.dim, self.dim), dtype=np.complex128)
        cvals = np.empty((n_cells, max(self.n_probes, 1)), dtype=np.float64)
        return out, cvals

    def rhs(self, rho: np.ndarray, neigh: np.ndarray, out: np.ndarray, cvals: np.ndarray) -> float:
        """Generator applied to every cell; returns the minimal derived rate.

        Raises NegativeRate when a mean-field rate falls below -1e-9, which
        signals a probe that is not a projector.  Rates in [-1e-9, 0) are
        clamped to zero inside the kernel.
        """
        min_rate = _core.rhs_batch(
            rho,
            neigh,
            self.probe_tgt,
            self.probe_amp,
            self.probe_slot,
            self.h_tgt,
            self.h_amp,
            self.h_base,
            self.h_pidx,
            self.c_tgt,
            self.c_amp,
            self.c_absq,
            self.c_base,
            self.c_pidx,
            1 if self.prescription == "trace" else 2,
            out,
            cvals,
        )
        if min_rate < -1e-9:
            raise NegativeRate(f"derived mean-field rate {min_rate:.3e} < -1e-9")
        return min_rate

    def probe_expectations(self, rho: np.ndarray, neigh: np.ndarray) -> np.ndarray:
        cvals = np.empty((rho.shape[0], max(self.n_probes, 1)), dtype=np.float64)
        _core.probe_values(rho, neigh, self.probe_tgt, self.probe_amp, self.probe_slot, cvals)
        return cvals[:, : self.n_probes]

    def magnetization(self, rho: np.ndarray) -> np.ndarray:
        """Per-cell magnetization m_z for a (cells, dim, dim) batch."""
        diag = np.einsum("mii->mi", rho).real
        return (diag @ self.sz_diag) / (self.ell * self.ell)


def pack_generator(ops: ClusterOperatorSet, prescription: str = "trace") -> PackedGenerator:
    if prescription not in PRESCRIPTIONS:
        raise ValueError(f"prescription must be one of {PRESCRIPTIONS}, got {prescription!r}")
    dim = ops.dim

    probe_keys: list[tuple] = []
    probe_index: dict[tuple, int] = {}
    probe_ops: list[ColumnOp] = []
    offsets: list[tuple[int, int]] = []
    offset_index: dict[tuple[int, int], int] = {}

    def register_probe(probe) -> int:
        key = probe.key
        if key in probe_index:
            return probe_index[key]
        if probe.offset not in offset_index:
            offset_index[probe.offset] = len(offsets)
            offsets.append(probe.offset)
        idx = len(probe_keys)
        probe_index[key] = idx
        probe_keys.append(key)
        probe_ops.append(probe.op)
        return idx

    field_couplings = [b for b in ops.boundary if b.kind == CouplingKind.HAMILTONIAN_FIELD]
    rate_couplings = [b for b in ops.boundary if b.kind != CouplingKind.HAMILTONIAN_FIELD]
    field_pidx = [[register_probe(p) for p in b.probes] for b in field_couplings]
    rate_pidx = [[register_probe(p) for p in b.probes] for b in rate_couplings]
    for idx_list in field_pidx + rate_pidx:
        if len(idx_list) > MAX_PROBES:
            raise ValueError("coupling exceeds MAX_PROBES probe factors")

    n_p = len(probe_keys)
    probe_tgt = np.zeros((n_p, dim), dtype=np.int64)
    probe_amp = np.zeros((n_p, dim), dtype=np.float64)
    probe_slot = np.zeros(n_p, dtype=np.int64)
    for i, op in enumerate(probe_ops):
        probe_tgt[i] = op.target
        probe_amp[i] = _require_real(op, "probe operator")
        probe_slot[i] = offset_index[probe_keys[i][0]]

    def pack_rows(static_rows, couplings, pidx_lists):
        n_rows = len(static_rows) + len(couplings)
        tgt = np.zeros((n_rows, dim), dtype=np.int64)
        amp = np.zeros((n_rows, dim), dtype=np.float64)
        base = np.zeros(n_rows, dtype=np.float64)
        pidx = np.full((n_rows, MAX_PROBES), -1, dtype=np.int64)
        for r, (coeff, op) in enumerate(static_rows):
            tgt[r] = op.target
            amp[r] = _require_real(op, "operator")
            base[r] = coeff
        for k, (b, plist) in enumerate(zip(couplings, pidx_lists)):
            r = len(static_rows) + k
            tgt[r] = b.on_op.target
            amp[r] = _require_real(b.on_op, "boundary operator")
            base[r] = b.base
            pidx[r, : len(plist)] = plist
        return tgt, amp, base, pidx

    h_static = [(coeff, op) for coeff, op in ops.h_terms]
    h_tgt, h_amp, h_base, h_pidx = pack_rows(h_static, field_couplings, field_pidx)

    c_static = [(ch.rate, ch.op) for ch in ops.channels]
    c_tgt, c_amp, c_base, c_pidx = pack_rows(c_static, rate_couplings, rate_pidx)
    c_absq = c_amp * c_amp

    return PackedGenerator(
        ops=ops,
        prescription=prescription,
        offsets=offsets,
        probe_keys=probe_keys,
        probe_tgt=probe_tgt,
        probe_amp=probe_amp,
        probe_slot=probe_slot,
        probe_ops=probe_ops,
        h_tgt=h_tgt,
        h_amp=h_amp,
        h_base=h_base,
        h_pidx=h_pidx,
        n_h_static=len(h_static),
        field_couplings=field_couplings,
        field_pidx=field_pidx,
        c_tgt=c_tgt,
        c_amp=c_amp,
        c_absq=c_absq,
        c_base=c_base,
        c_pidx=c_pidx,
        n_c_static=len(c_static),
        rate_couplings=rate_couplings,
        rate_pidx=rate_pidx,
        sz_diag=sz_diagonal(ops.ell),
    )


def grid_neighbor_table(
    nx: int, ny: int, offsets: list[tuple[int, int]], periodic: bool = True
) -> np.ndarray:
    """Cell index per offset slot for an nx-by-ny cluster grid.

    Cell (cx, cy) has flat index cx + nx*cy.  Under open boundaries a
    missing neighbor is marked -1, which deactivates couplings probing it.
    """
    n_cells = nx * ny
    table = np.full((n_cells, max(len(offsets), 1)), -1, dtype=np.int64)
    for s, (dx, dy) in enumerate(offsets):
        for cy in range(ny):
            for cx in range(nx):
                tx, ty = cx + dx, cy + dy
                if periodic:
                    table[cx + nx * cy, s] = (tx % nx) + nx * (ty % ny)
                elif 0 <= tx < nx and 0 <= ty < ny:
                    table[cx + nx * cy, s] = tx + nx * ty
    return table
