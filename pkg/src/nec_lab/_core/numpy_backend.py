"""Pure-numpy fallback for the compiled generator kernel.

Mirrors ``_kernel`` exactly; selected at import when the extension is not
built (or when NEC_LAB_BACKEND=numpy).
"""

import numpy as np


def probe_values(rho, neigh, probe_tgt, probe_amp, probe_slot, cvals):
    m_count, dim, _ = rho.shape
    cols = np.arange(dim)
    for p in range(probe_tgt.shape[0]):
        cells = neigh[:, probe_slot[p]]
        good = cells >= 0
        vals = np.zeros(m_count)
        if good.any():
            sub = rho[cells[good]][:, cols, probe_tgt[p]].real
            vals[good] = sub @ probe_amp[p]
        cvals[:, p] = vals


def _combine(base, pidx, cvals, square):
    """base * prod over probe slots of c (or c**2)."""
    m_count = cvals.shape[0]
    g = cvals * cvals if square else cvals
    acc = np.broadcast_to(base, (m_count, base.shape[0])).copy()
    for q in range(pidx.shape[1]):
        idx = pidx[:, q]
        live = idx >= 0
        if not live.any():
            break
        acc[:, live] *= g[:, idx[live]]
    return acc


def rhs_batch(
    rho,
    neigh,
    probe_tgt,
    probe_amp,
    probe_slot,
    h_tgt,
    h_amp,
    h_base,
    h_pidx,
    c_tgt,
    c_amp,
    c_absq,
    c_base,
    c_pidx,
    prescription,
    out,
    cvals,
):
    m_count, dim, _ = rho.shape
    probe_values(rho, neigh, probe_tgt, probe_amp, probe_slot, cvals)
    out[:] = 0.0

    min_rate = np.inf
    n_c = c_tgt.shape[0]
    if n_c:
        rate = _combine(c_base, c_pidx, cvals, prescription == 2)
        min_rate = float(rate.min())
        np.maximum(rate, 0.0, out=rate)
        dtot = rate @ c_absq  # (M, dim)
        for r in range(n_c):
            nz = np.nonzero(c_amp[r])[0]
            if nz.size == 0:
                continue
            t = c_tgt[r, nz]
            w = c_amp[r, nz]
            out[:, t[:, None], t[None, :]] += (
                rate[:, r, None, None]
                * (w[:, None] * w[None, :])
                * rho[:, nz[:, None], nz[None, :]]
            )
        out -= 0.5 * (dtot[:, :, None] + dtot[:, None, :]) * rho

    n_h = h_tgt.shape[0]
    if n_h:
        coeff = _combine(h_base, h_pidx, cvals, False)
        for r in range(n_h):
            nz = np.nonzero(h_amp[r])[0]
            if nz.size == 0:
                continue
            t = h_tgt[r, nz]
            iw = 1j * coeff[:, r, None, None] * h_amp[r, nz]
            out[:, t, :] -= iw.reshape(m_count, -1, 1) * rho[:, nz, :]
            out[:, :, nz] += iw.reshape(m_count, 1, -1) * rho[:, :, t]
    return min_rate
