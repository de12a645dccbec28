"""Hysteresis protocol, phase diagrams and critical-boundary fits.

The order parameter is the magnetization gap between a forward bias sweep
(h from -1 to 1, each point seeded with the previous steady state, the
h=-1 end seeded all-down) and the mirrored backward sweep.  The bistable
region closes along T_c(h) = R**2 (1-|h|)**2 + T*, which is fitted by
linear least squares in the basis {(1-|h|)**2, 1}.
"""

from __future__ import annotations

import itertools
import multiprocessing
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .cmf import all_down_state, all_up_state, magnetization, ti_evolve
from .errors import InsufficientBoundary
from .generator import pack_generator
from .lindblad import StepControl
from .operators import HamiltonianSpec, build_cluster_operators, build_rates

__all__ = [
    "SweepParams",
    "HysteresisResult",
    "CriticalFit",
    "TransitionOrder",
    "hysteresis",
    "branch_gap",
    "phase_diagram",
    "fit_boundary",
    "transition_order_probe",
    "worker_count",
]

BISTABLE_THRESHOLD = 0.05


def worker_count(requested: int | None = None) -> int:
    if requested is not None and requested > 0:
        return requested
    env = os.environ.get("NEC_LAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SweepParams:
    """Model and solver settings shared by all sweep drivers."""

    hamiltonian: HamiltonianSpec
    ell: int = 2
    gamma: float = 1.0
    prescription: str = "trace"
    steady_tol: float = 1e-7
    t_max: float = 2000.0
    rtol: float = 1e-8

    def control(self) -> StepControl:
        return StepControl(rtol=self.rtol)

    def packed(self, T: float, h: float):
        ops = build_cluster_operators(
            self.ell, build_rates(self.gamma, T, h), self.hamiltonian
        )
        return pack_generator(ops, self.prescription)


@dataclass
class HysteresisResult:
    T: float
    h_grid: np.ndarray
    mz_forward: np.ndarray
    mz_backward: np.ndarray
    converged: np.ndarray

    @property
    def dmz(self) -> np.ndarray:
        return np.abs(self.mz_forward - self.mz_backward)


def _steady(params: SweepParams, T: float, h: float, seed: np.ndarray):
    packed = params.packed(T, h)
    return ti_evolve(
        packed,
        seed,
        t_max=params.t_max,
        tol=params.steady_tol,
        control=params.control(),
    )


def hysteresis(params: SweepParams, T: float, dh: float = 0.1) -> HysteresisResult:
    """Forward and backward bias sweeps at fixed noise amplitude T.

    Each point is seeded from the steady state of the previous one; the
    h = -1 end starts from the all-down product state and the h = +1 end
    from all-up.  Non-converged points are flagged and the sweep continues.
    """
    n = int(round(2.0 / dh))
    if abs(n * dh - 2.0) > 1e-9:
        raise ValueError(f"dh={dh} does not divide the bias range [-1, 1] evenly")
    h_grid = np.round(np.linspace(-1.0, 1.0, n + 1), 12)

    mz_f = np.empty_like(h_grid)
    mz_b = np.empty_like(h_grid)
    conv = np.ones((2, h_grid.size), dtype=bool)

    seed = all_down_state(params.ell)
    for i, h in enumerate(h_grid):
        res = _steady(params, T, float(h), seed)
        mz_f[i] = magnetization(res.state, params.ell)
        conv[0, i] = res.converged
        seed = res.state
    seed = all_up_state(params.ell)
    for i in range(h_grid.size - 1, -1, -1):
        res = _steady(params, T, float(h_grid[i]), seed)
        mz_b[i] = magnetization(res.state, params.ell)
        conv[1, i] = res.converged
        seed = res.state
    return HysteresisResult(
        T=T, h_grid=h_grid, mz_forward=mz_f, mz_backward=mz_b, converged=conv.all(axis=0)
    )


def branch_gap(params: SweepParams, T: float, h: float) -> tuple[float, bool]:
    """|m_z| gap between the all-up- and all-down-seeded steady states.

    Inside the bistable phase the two seeds land on the two branches, so
    this equals the hysteresis order parameter without the sweep overhead.
    """
    up = _steady(params, T, h, all_up_state(params.ell))
    dn = _steady(params, T, h, all_down_state(params.ell))
    gap = abs(magnetization(up.state, params.ell) - magnetization(dn.state, params.ell))
    return gap, up.converged and dn.converged


def _hysteresis_task(args):
    params, T, dh = args
    return hysteresis(params, T, dh)


def phase_diagram(
    params: SweepParams,
    t_grid,
    dh: float = 0.1,
    processes: int | None = None,
) -> list[HysteresisResult]:
    """One hysteresis row per T, parallel across rows, ordered by T."""
    t_list = [float(t) for t in t_grid]
    tasks = [(params, t, dh) for t in t_list]
    n_proc = min(worker_count(processes), len(tasks))
    if n_proc <= 1 or len(tasks) == 1:
        return [_hysteresis_task(t) for t in tasks]
    with multiprocessing.get_context("fork").Pool(n_proc) as pool:
        return list(pool.map(_hysteresis_task, tasks))


@dataclass
class CriticalFit:
    """T_c(h) = R**2 (1-|h|)**2 + T*; t_star is the critical amplitude at
    |h| = 1 and tc_zero = R**2 + T* the one at h = 0."""

    t_star: float
    r: float
    residual: float
    n_cells: int
    points: list = field(default_factory=list)

    @property
    def tc_zero(self) -> float:
        return self.r**2 + self.t_star


def boundary_points(
    rows: list[HysteresisResult], threshold: float = BISTABLE_THRESHOLD
) -> list[tuple[float, float]]:
    """Outermost bistable |h| per T row, skipping rows where the boundary
    is not bracketed inside the grid (bistable at |h| = 1)."""
    points = []
    for row in rows:
        bistable = row.dmz > threshold
        if not bistable.any():
            continue
        outer = np.max(np.abs(row.h_grid[bistable]))
        if outer >= np.max(np.abs(row.h_grid)) - 1e-9:
            continue
        points.append((float(outer), float(row.T)))
    return points


def fit_boundary(
    rows: list[HysteresisResult], threshold: float = BISTABLE_THRESHOLD
) -> CriticalFit:
    points = boundary_points(rows, threshold)
    if len(points) < 4:
        raise InsufficientBoundary(
            f"only {len(points)} boundary cells detected, need at least 4"
        )
    h = np.array([p[0] for p in points])
    t = np.array([p[1] for p in points])
    basis = np.stack([(1.0 - np.abs(h)) ** 2, np.ones_like(h)], axis=1)
    coef, res, _, _ = np.linalg.lstsq(basis, t, rcond=None)
    r_sq, t_star = float(coef[0]), float(coef[1])
    residual = float(np.sqrt(res[0])) if res.size else 0.0
    if r_sq <= 0:
        raise InsufficientBoundary("fitted curvature R**2 is not positive")
    return CriticalFit(
        t_star=t_star, r=float(np.sqrt(r_sq)), residual=residual,
        n_cells=len(points), points=points,
    )


class TransitionOrder(Enum):
    CONTINUOUS = "continuous"
    FIRST_ORDER = "first_order"
    UNCLASSIFIED = "unclassified"


def classify_gap_decay(gaps, threshold: float = BISTABLE_THRESHOLD) -> TransitionOrder:
    """Transition order from the order-parameter decay along rising T.

    Continuous: the gap at the last bistable point is already < 0.1.
    First order: it exceeds 0.3 and then drops below the bistable
    threshold.  Anything else (including a grid that never crosses the
    boundary) is reported unclassified, never guessed.
    """
    gaps = np.asarray(gaps, dtype=float)
    bistable = gaps > threshold
    if not bistable.any() or bistable.all():
        return TransitionOrder.UNCLASSIFIED
    last = int(np.nonzero(bistable)[0][-1])
    if last + 1 >= gaps.size:
        return TransitionOrder.UNCLASSIFIED
    last_gap = gaps[last]
    if last_gap < 0.1:
        return TransitionOrder.CONTINUOUS
    if last_gap > 0.3 and gaps[last + 1] <= threshold:
        return TransitionOrder.FIRST_ORDER
    return TransitionOrder.UNCLASSIFIED


def transition_order_probe(
    params: SweepParams,
    h: float,
    t_grid,
    threshold: float = BISTABLE_THRESHOLD,
) -> tuple[TransitionOrder, np.ndarray]:
    """Classify the transition at fixed bias from two-seed gaps over T."""
    t_arr = np.array([float(t) for t in t_grid])
    gaps = np.empty_like(t_arr)
    for i, t in enumerate(t_arr):
        gaps[i], _ = branch_gap(params, t, h)
    return classify_gap_decay(gaps, threshold), gaps
