# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Lindblad right-hand side for batches of cluster states.

Every operator row is stored in compressed column form (one target index
and one real amplitude per basis column).  The mean-field probe
expectations, effective rates and the full generator action are evaluated
in a single pass per cell, which is the hot loop of every driver.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def rhs_batch(
    cnp.complex128_t[:, :, ::1] rho,
    cnp.int64_t[:, ::1] neigh,
    cnp.int64_t[:, ::1] probe_tgt,
    double[:, ::1] probe_amp,
    cnp.int64_t[::1] probe_slot,
    cnp.int64_t[:, ::1] h_tgt,
    double[:, ::1] h_amp,
    double[::1] h_base,
    cnp.int64_t[:, ::1] h_pidx,
    cnp.int64_t[:, ::1] c_tgt,
    double[:, ::1] c_amp,
    double[:, ::1] c_absq,
    double[::1] c_base,
    cnp.int64_t[:, ::1] c_pidx,
    int prescription,
    cnp.complex128_t[:, :, ::1] out,
    double[:, ::1] cvals,
):
    """out <- generator(rho) cell by cell; returns the smallest derived rate.

    ``neigh[m, s]`` is the cell supplying probes with offset slot ``s`` for
    cell ``m`` (-1 for a missing neighbor under open boundaries, which
    deactivates the couplings probing it).  ``prescription`` selects how a
    probe expectation c enters a dissipative rate: 1 -> c, 2 -> c**2.
    """
    cdef Py_ssize_t m_count = rho.shape[0]
    cdef Py_ssize_t dim = rho.shape[1]
    cdef Py_ssize_t n_p = probe_tgt.shape[0]
    cdef Py_ssize_t n_h = h_tgt.shape[0]
    cdef Py_ssize_t n_c = c_tgt.shape[0]
    cdef Py_ssize_t maxp = c_pidx.shape[1] if n_c else (h_pidx.shape[1] if n_h else 0)
    cdef Py_ssize_t m, p, r, q, c, i, j, a, b, ta, cell
    cdef double s, aa, ab, scal, rate, cv, coeff
    cdef double min_rate = np.inf
    cdef double complex w, iw
    cdef cnp.int64_t pi
    cdef double[::1] dtot = np.empty(dim, dtype=np.float64)

    for m in range(m_count):
        # mean-field probe expectations on the neighbor states
        for p in range(n_p):
            cell = neigh[m, probe_slot[p]]
            if cell < 0:
                cvals[m, p] = 0.0
                continue
            s = 0.0
            for c in range(dim):
                aa = probe_amp[p, c]
                if aa != 0.0:
                    s += aa * rho[cell, c, probe_tgt[p, c]].real
            cvals[m, p] = s

        for i in range(dim):
            dtot[i] = 0.0
            for j in range(dim):
                out[m, i, j] = 0.0

        # dissipative channels: rate * (L rho L^dag) and the L^dag L diagonal
        for r in range(n_c):
            scal = 1.0
            for q in range(maxp):
                pi = c_pidx[r, q]
                if pi < 0:
                    break
                cv = cvals[m, pi]
                if prescription == 2:
                    cv = cv * cv
                scal *= cv
            rate = c_base[r] * scal
            if rate < min_rate:
                min_rate = rate
            if rate <= 0.0:
                continue
            for a in range(dim):
                aa = c_amp[r, a]
                if aa == 0.0:
                    continue
                ta = c_tgt[r, a]
                s = rate * aa
                for b in range(dim):
                    ab = c_amp[r, b]
                    if ab != 0.0:
                        out[m, ta, c_tgt[r, b]] = out[m, ta, c_tgt[r, b]] + s * ab * rho[m, a, b]
            for i in range(dim):
                dtot[i] += rate * c_absq[r, i]

        # -(1/2) {L^dag L, rho} for all channels at once
        for i in range(dim):
            for j in range(dim):
                out[m, i, j] = out[m, i, j] - 0.5 * (dtot[i] + dtot[j]) * rho[m, i, j]

        # Hamiltonian rows: -i coeff (O rho - rho O)
        for r in range(n_h):
            coeff = h_base[r]
            for q in range(maxp):
                pi = h_pidx[r, q]
                if pi < 0:
                    break
                coeff *= cvals[m, pi]
            if coeff == 0.0:
                continue
            for c in range(dim):
                aa = h_amp[r, c]
                if aa == 0.0:
                    continue
                ta = h_tgt[r, c]
                iw = 1j * (coeff * aa)
                for j in range(dim):
                    out[m, ta, j] = out[m, ta, j] - iw * rho[m, c, j]
                for i in range(dim):
                    out[m, i, c] = out[m, i, c] + iw * rho[m, i, ta]
    return min_rate


def probe_values(
    cnp.complex128_t[:, :, ::1] rho,
    cnp.int64_t[:, ::1] neigh,
    cnp.int64_t[:, ::1] probe_tgt,
    double[:, ::1] probe_amp,
    cnp.int64_t[::1] probe_slot,
    double[:, ::1] cvals,
):
    """Probe expectations only (used by closure inspection and stability)."""
    cdef Py_ssize_t m_count = rho.shape[0]
    cdef Py_ssize_t dim = rho.shape[1]
    cdef Py_ssize_t n_p = probe_tgt.shape[0]
    cdef Py_ssize_t m, p, c, cell
    cdef double s, aa
    for m in range(m_count):
        for p in range(n_p):
            cell = neigh[m, probe_slot[p]]
            if cell < 0:
                cvals[m, p] = 0.0
                continue
            s = 0.0
            for c in range(dim):
                aa = probe_amp[p, c]
                if aa != 0.0:
                    s += aa * rho[cell, c, probe_tgt[p, c]].real
            cvals[m, p] = s
