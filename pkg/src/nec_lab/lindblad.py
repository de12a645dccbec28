"""Lindblad evolution of cluster density matrices.

Two routes compute the same generator action: a readable sparse-matrix
reference (:func:`rhs`, used by tests and the superoperator builder) and
the packed kernel route used by the drivers.  The integrator is an
adaptive Dormand-Prince 5(4) pair acting on batches of matrices with a
shared step size, so a uniform lattice reproduces the single-cluster
trajectory bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CapExceeded, DimensionMismatch, StepUnderflow

__all__ = [
    "GeneratorSnapshot",
    "StepControl",
    "SteadyStateResult",
    "NegativityWarning",
    "rhs",
    "evolve",
    "find_steady_state",
    "superoperator_matrix",
    "vec",
    "unvec",
    "purity",
    "trace_error",
    "check_density_matrix",
]


class NegativityWarning(UserWarning):
    """State developed an eigenvalue below -1e-6 (monitored, not enforced)."""


@dataclass
class GeneratorSnapshot:
    """Frozen Lindblad generator: Hermitian H plus weighted jump channels.

    L^dag L is precomputed per channel; the anticommutator dominates the
    reference evaluation cost.
    """

    hamiltonian: sp.spmatrix
    channels: list[tuple[sp.spmatrix, float]]
    _prepared: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.hamiltonian = sp.csr_matrix(self.hamiltonian)
        self._prepared = []
        for L, rate in self.channels:
            L = sp.csr_matrix(L)
            self._prepared.append((L, L.getH().tocsr(), (L.getH() @ L).tocsr(), float(rate)))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def rhs(state: np.ndarray, generator: GeneratorSnapshot) -> np.ndarray:
    """drho/dt = -i[H, rho] + sum_k rate_k (L rho L^dag - 1/2 {L^dag L, rho})."""
    if state.shape != (generator.dim, generator.dim):
        raise DimensionMismatch(
            f"state shape {state.shape} vs generator dimension {generator.dim}"
        )
    h = generator.hamiltonian
    acc = -1j * (h @ state - state @ h)
    for L, Lh, LdL, rate in generator._prepared:
        if rate == 0.0:
            continue
        acc += rate * (L @ state @ Lh - 0.5 * (LdL @ state + state @ LdL))
    return np.asarray(acc)


# ---------------------------------------------------------------------------
# Adaptive Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# b5 - b4, including the last-stage contribution of the embedded pair
_ERR = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


@dataclass
class StepControl:
    rtol: float = 1e-8
    atol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 10.0
    safety: float = 0.9
    max_growth: float = 5.0


@dataclass
class SteadyStateResult:
    state: np.ndarray
    converged: bool
    elapsed: float
    steps: int = 0


def _cell_norms(y: np.ndarray) -> np.ndarray:
    flat = y.reshape(y.shape[0], -1)
    return np.sqrt(np.einsum("mi,mi->m", flat.real, flat.real) + np.einsum("mi,mi->m", flat.imag, flat.imag))


def _hermitize(y: np.ndarray) -> None:
    y += np.conj(np.swapaxes(y, -1, -2))
    y *= 0.5


def evolve(
    rhs_fn,
    y0: np.ndarray,
    t_end: float,
    control: StepControl | None = None,
    record_times=None,
    observe=None,
    steady_tol: float | None = None,
    steady_window: int = 10,
    t0: float = 0.0,
):
    """Integrate dy/dt = rhs_fn(y) for a batch y of density matrices.

    The batch shares one adaptive step: a step is accepted only when every
    cell meets the tolerance, and rejected steps are halved.  States are
    re-symmetrized after each accepted step.  When ``steady_tol`` is given,
    integration stops once max-over-cells ||rhs||_F stays below it for
    ``steady_window`` consecutive accepted steps.

    Returns (y, t_reached, converged, n_steps).
    """
    ctl = control or StepControl()
    y = np.array(y0, dtype=np.complex128, order="C")
    if y.ndim == 2:
        y = y[None]
    squeeze = np.ndim(y0) == 2

    record = sorted(record_times) if record_times is not None else []
    rec_i = 0
    while rec_i < len(record) and record[rec_i] < t0 - 1e-12:
        rec_i += 1
    t = t0
    if observe is not None and rec_i < len(record) and abs(record[rec_i] - t) <= 1e-12:
        observe(t, y[0] if squeeze else y)
        rec_i += 1

    k1 = rhs_fn(y)
    dt = ctl.dt_init
    steps = 0
    quiet = 0
    converged = steady_tol is None

    while t < t_end - 1e-12:
        dt = min(dt, ctl.dt_max, t_end - t)
        if rec_i < len(record):
            dt = min(dt, record[rec_i] - t) if record[rec_i] > t + 1e-12 else dt
        k = [k1, None, None, None, None, None]
        for s in range(1, 6):
            ys = y + dt * sum(a * k[i] for i, a in enumerate(_A[s]) if a != 0.0)
            k[s] = rhs_fn(ys)
        y5 = y + dt * sum(b * k[i] for i, b in enumerate(_B5) if b != 0.0)
        k7 = rhs_fn(y5)
        err = dt * sum(e * ki for e, ki in zip(_ERR, k + [k7]) if e != 0.0)
        scale = ctl.atol + ctl.rtol * np.maximum(_cell_norms(y), _cell_norms(y5))
        ratio = float(np.max(_cell_norms(err) / scale))

        if not np.isfinite(ratio):
            dt *= 0.5
            if dt < ctl.dt_min:
                raise StepUnderflow(f"dt={dt:.3e} below dt_min with non-finite error")
            continue
        if ratio > 1.0:
            dt *= 0.5
            if dt < ctl.dt_min:
                raise StepUnderflow(f"dt={dt:.3e} below dt_min at t={t:.6g}")
            continue

        t += dt
        y = y5
        _hermitize(y)
        k1 = k7
        steps += 1

        if observe is not None:
            while rec_i < len(record) and record[rec_i] <= t + 1e-12:
                observe(record[rec_i], y[0] if squeeze else y)
                rec_i += 1

        if steady_tol is not None:
            if float(np.max(_cell_norms(k1))) < steady_tol:
                quiet += 1
                if quiet >= steady_window:
                    converged = True
                    break
            else:
                quiet = 0

        growth = ctl.max_growth if ratio == 0.0 else min(ctl.max_growth, ctl.safety * ratio ** -0.2)
        dt = min(dt * growth, ctl.dt_max)

    return (y[0] if squeeze else y), t, converged, steps


def fixed_step(rhs_fn, y: np.ndarray, dt: float) -> np.ndarray:
    """One fifth-order step at fixed dt (no error control), re-symmetrized."""
    squeeze = y.ndim == 2
    yb = np.array(y, dtype=np.complex128, order="C")
    if squeeze:
        yb = yb[None]
    k = [rhs_fn(yb)]
    for s in range(1, 6):
        ys = yb + dt * sum(a * k[i] for i, a in enumerate(_A[s]) if a != 0.0)
        k.append(rhs_fn(ys))
    y5 = yb + dt * sum(b * k[i] for i, b in enumerate(_B5) if b != 0.0)
    _hermitize(y5)
    return y5[0] if squeeze else y5


def find_steady_state(
    rhs_fn,
    initial: np.ndarray,
    tol: float = 1e-7,
    t_max: float = 2000.0,
    control: StepControl | None = None,
) -> SteadyStateResult:
    """Integrate until max ||rhs||_F < tol holds over 10 consecutive checks."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    y, t, converged, steps = evolve(
        rhs_fn, initial, t_max, control=control, steady_tol=tol
    )
    return SteadyStateResult(state=y, converged=converged, elapsed=t, steps=steps)


# ---------------------------------------------------------------------------
# Vectorized superoperator (column stacking)
# ---------------------------------------------------------------------------


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    dim = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape(dim, dim, order="F")


def superoperator_matrix(generator: GeneratorSnapshot, cap: int = 65536) -> sp.csr_matrix:
    """M with vec(rhs(rho)) = M @ vec(rho); dimension dim**2 capped."""
    dim = generator.dim
    if dim * dim > cap:
        raise CapExceeded(f"superoperator dimension {dim * dim} exceeds cap {cap}")
    eye = sp.identity(dim, dtype=np.complex128, format="csr")
    h = generator.hamiltonian
    m = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for L, _, LdL, rate in generator._prepared:
        if rate == 0.0:
            continue
        m = m + rate * (
            sp.kron(L.conj(), L) - 0.5 * sp.kron(eye, LdL) - 0.5 * sp.kron(LdL.T, eye)
        )
    return m.tocsr()


# ---------------------------------------------------------------------------
# State diagnostics
# ---------------------------------------------------------------------------


def purity(rho: np.ndarray) -> float:
    return float(np.einsum("ij,ji->", rho, rho).real)


def trace_error(rho: np.ndarray) -> float:
    return abs(float(np.trace(rho).real) - 1.0)


def check_density_matrix(
    rho: np.ndarray,
    herm_tol: float = 1e-10,
    trace_tol: float = 1e-9,
    eig_floor: float = -1e-8,
) -> dict:
    """Validate Hermiticity, unit trace and positivity; warn on negativity."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr_err = trace_error(rho)
    min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
    if min_eig < -1e-6:
        warnings.warn(
            f"density matrix eigenvalue {min_eig:.3e} below -1e-6", NegativityWarning
        )
    ok = herm <= herm_tol and tr_err <= trace_tol and min_eig >= eig_floor
    return {"hermiticity": herm, "trace_error": tr_err, "min_eig": min_eig, "ok": ok}
