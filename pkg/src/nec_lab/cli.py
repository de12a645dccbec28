"""Command line interface: steady, sweep, phase-diagram, stability, island, fit.

Every run validates its config, writes deterministic CSV outputs plus a
manifest with the config hash, and echoes the resolved configuration.
Errors exit nonzero with a machine-readable report on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import icmf
from .cmf import all_down_state, all_up_state, magnetization, maximally_mixed, ti_evolve
from .config import RunConfig, parse_config, validate_for_task
from .errors import NecLabError, SchemaError
from .generator import pack_generator
from .lindblad import StepControl
from .operators import build_cluster_operators, build_rates
from .runio import RunManifest, fmt, read_csv, write_csv
from .stability import FluctuationOperator, brillouin_grid
from .sweep import (
    SweepParams,
    boundary_points,
    fit_boundary,
    hysteresis,
    phase_diagram,
    worker_count,
)

SWEEP_HEADER = ["model", "ell", "omega", "T", "h", "mz_fwd", "mz_bwd", "dmz", "converged"]


def _seed_state(cfg: RunConfig):
    if cfg.seed_state == "up":
        return all_up_state(cfg.ell)
    if cfg.seed_state == "down":
        return all_down_state(cfg.ell)
    return maximally_mixed(cfg.ell)


def _sweep_params(cfg: RunConfig) -> SweepParams:
    return SweepParams(
        hamiltonian=cfg.hamiltonian(),
        ell=cfg.ell,
        gamma=cfg.gamma,
        prescription=cfg.prescription,
        steady_tol=cfg.steady_tol,
        t_max=cfg.t_max,
        rtol=cfg.rtol,
    )


def _sweep_rows(cfg: RunConfig, results):
    rows = []
    for res in results:
        for i, h in enumerate(res.h_grid):
            rows.append(
                [
                    cfg.kind,
                    cfg.ell,
                    cfg.omega,
                    res.T,
                    float(h),
                    float(res.mz_forward[i]),
                    float(res.mz_backward[i]),
                    float(res.dmz[i]),
                    bool(res.converged[i]),
                ]
            )
    return rows


def task_steady(cfg: RunConfig, manifest: RunManifest, out: Path):
    from .cmf import make_rhs
    from .lindblad import evolve, purity, trace_error

    ops = build_cluster_operators(cfg.ell, build_rates(cfg.gamma, cfg.T, cfg.h), cfg.hamiltonian())
    packed = pack_generator(ops, cfg.prescription)
    if cfg.dump_trajectory:
        rows = []

        def observe(t, y):
            rows.append([float(t), magnetization(y, cfg.ell), purity(y), trace_error(y)])

        y, t, converged, _ = evolve(
            make_rhs(packed), _seed_state(cfg), cfg.t_max,
            control=StepControl(rtol=cfg.rtol),
            record_times=np.arange(0.0, cfg.t_max + 0.25, 0.5),
            observe=observe, steady_tol=cfg.steady_tol,
        )
        from .lindblad import SteadyStateResult

        res = SteadyStateResult(state=y, converged=converged, elapsed=t)
        path = write_csv(out / "trajectory.csv", ["t", "m_z", "purity", "trace_error"], rows)
        manifest.add_output(path)
    else:
        res = ti_evolve(
            packed, _seed_state(cfg), t_max=cfg.t_max, tol=cfg.steady_tol,
            control=StepControl(rtol=cfg.rtol),
        )
    mz = magnetization(res.state, cfg.ell)
    path = write_csv(
        out / "steady.csv",
        ["model", "ell", "omega", "T", "h", "mz", "converged"],
        [[cfg.kind, cfg.ell, cfg.omega, cfg.T, cfg.h, mz, bool(res.converged)]],
    )
    manifest.add_output(path)
    manifest.metadata["elapsed_model_time"] = res.elapsed
    manifest.flags["converged"] = bool(res.converged)


def task_sweep(cfg: RunConfig, manifest: RunManifest, out: Path):
    row = hysteresis(_sweep_params(cfg), cfg.T, cfg.dh)
    path = write_csv(out / "sweep.csv", SWEEP_HEADER, _sweep_rows(cfg, [row]))
    manifest.add_output(path)
    manifest.flags["all_converged"] = bool(row.converged.all())


def task_phase_diagram(cfg: RunConfig, manifest: RunManifest, out: Path):
    rows = phase_diagram(_sweep_params(cfg), cfg.t_grid, cfg.dh, processes=cfg.threads)
    path = write_csv(out / "phase_diagram.csv", SWEEP_HEADER, _sweep_rows(cfg, rows))
    manifest.add_output(path)
    manifest.flags["all_converged"] = bool(all(r.converged.all() for r in rows))
    sensitivity = {}
    for threshold in (0.03, 0.05, 0.08):
        try:
            fit = fit_boundary(rows, threshold)
            sensitivity[fmt(threshold)] = {
                "t_star": fit.t_star,
                "r": fit.r,
                "tc_zero": fit.tc_zero,
                "n_cells": fit.n_cells,
            }
        except NecLabError as exc:
            sensitivity[fmt(threshold)] = {"error": str(exc)}
    manifest.metadata["boundary_fit_threshold_sensitivity"] = sensitivity


def task_stability(cfg: RunConfig, manifest: RunManifest, out: Path):
    ops = build_cluster_operators(cfg.ell, build_rates(cfg.gamma, cfg.T, cfg.h), cfg.hamiltonian())
    packed = pack_generator(ops, cfg.prescription)
    res = ti_evolve(
        packed, _seed_state(cfg), t_max=cfg.t_max, tol=cfg.steady_tol,
        control=StepControl(rtol=cfg.rtol),
    )
    manifest.flags["steady_state_converged"] = bool(res.converged)
    fluct = FluctuationOperator(
        ops, res.state, prescription=cfg.prescription,
        include_backaction=cfg.include_backaction,
    )
    kx = brillouin_grid(cfg.ell, cfg.k_points)
    ky = np.array([cfg.ky]) if cfg.ky is not None else brillouin_grid(cfg.ell, cfg.k_points)
    table = fluct.mu_table(kx, ky, workers=worker_count(cfg.threads))
    rows = []
    for iy, ky_val in enumerate(ky):
        for ix, kx_val in enumerate(kx):
            rows.append([float(kx_val), float(ky_val), float(table[iy, ix]), cfg.prescription])
    path = write_csv(out / "stability.csv", ["kx", "ky", "mu", "prescription"], rows)
    manifest.add_output(path)
    manifest.flags["include_backaction"] = cfg.include_backaction
    manifest.metadata["mu_max"] = float(table.max())
    manifest.metadata["steady_state_mz"] = magnetization(res.state, cfg.ell)


def task_island(cfg: RunConfig, manifest: RunManifest, out: Path):
    ops = build_cluster_operators(cfg.ell, build_rates(cfg.gamma, cfg.T, cfg.h), cfg.hamiltonian())
    packed = pack_generator(ops, cfg.prescription)
    island_spin = "down" if cfg.h >= 0 else "up"
    lattice = icmf.init_island(
        cfg.island_L, cfg.ell, cfg.ell_down, island_spin, cfg.boundary == "periodic"
    )
    traj = icmf.evolve_island(
        lattice, packed, cfg.island_t_max, steady_tol=cfg.steady_tol,
        stride=cfg.stride, control=StepControl(rtol=cfg.rtol),
    )
    path = write_csv(
        out / "trajectory.csv",
        ["t", "mz_global"],
        [[float(t), float(m)] for t, m in zip(traj.times, traj.mz_global)],
    )
    manifest.add_output(path)
    map_times = []
    for i, (t, m_map) in enumerate(zip(traj.map_times, traj.maps)):
        rows = []
        for cy in range(m_map.shape[0]):
            for cx in range(m_map.shape[1]):
                rows.append([cx, cy, float(m_map[cy, cx])])
        p = write_csv(out / f"map_{i:02d}.csv", ["cx", "cy", "mz_cluster"], rows)
        manifest.add_output(p)
        map_times.append(float(t))
    manifest.flags["converged"] = bool(traj.converged)
    manifest.metadata["map_times"] = map_times
    manifest.metadata["island_spin"] = island_spin
    manifest.metadata["mz_final"] = float(traj.mz_global[-1])
    try:
        manifest.metadata["tau"] = icmf.relaxation_time(traj.times, traj.mz_global)
    except NecLabError as exc:
        manifest.metadata["tau"] = None
        manifest.metadata["tau_error"] = str(exc)


def task_fit(args, manifest: RunManifest, out: Path):
    kind = args.kind
    header, rows = read_csv(Path(args.input))
    if not rows:
        raise NecLabError(f"input {args.input} has no data rows")
    if kind == "boundary":
        col = {name: i for i, name in enumerate(header)}
        from .sweep import HysteresisResult

        by_t = {}
        for row in rows:
            by_t.setdefault(float(row[col["T"]]), []).append(row)
        results = []
        for t_val in sorted(by_t):
            chunk = sorted(by_t[t_val], key=lambda r: float(r[col["h"]]))
            results.append(
                HysteresisResult(
                    T=t_val,
                    h_grid=np.array([float(r[col["h"]]) for r in chunk]),
                    mz_forward=np.array([float(r[col["mz_fwd"]]) for r in chunk]),
                    mz_backward=np.array([float(r[col["mz_bwd"]]) for r in chunk]),
                    converged=np.array([r[col["converged"]] == "true" for r in chunk]),
                )
            )
        fit = fit_boundary(results)
        payload = {
            "t_star": fit.t_star,
            "r": fit.r,
            "tc_zero": fit.tc_zero,
            "residual": fit.residual,
            "n_cells": fit.n_cells,
            "boundary_points": fit.points,
        }
    elif kind == "velocity":
        col = {name: i for i, name in enumerate(header)}
        sizes = [float(r[col["ell_down"]]) for r in rows]
        taus = [float(r[col["tau"]]) for r in rows]
        fit = icmf.fit_velocity(sizes, taus)
        payload = {
            "v": fit.v,
            "signed_velocity": fit.signed_velocity,
            "slope": fit.slope,
            "slope_stderr": fit.slope_stderr,
            "r_squared": fit.r_squared,
        }
    elif kind == "linear-law":
        col = {name: i for i, name in enumerate(header)}
        t_samples = [
            (float(r[col["value"]]), float(r[col["v"]])) for r in rows if r[col["axis"]] == "T"
        ]
        o_samples = [
            (float(r[col["value"]]), float(r[col["v"]])) for r in rows if r[col["axis"]] == "omega"
        ]
        fit = icmf.fit_linear_law(t_samples, o_samples)
        payload = {
            "thermal_slope": fit.thermal_slope,
            "drive_slope": fit.drive_slope,
            "intercept_thermal_fit": fit.intercept_thermal_fit,
            "intercept_drive_fit": fit.intercept_drive_fit,
            "intercept_difference": fit.intercept_difference,
            "r_squared_thermal": fit.r_squared_thermal,
            "r_squared_drive": fit.r_squared_drive,
        }
    else:
        raise NecLabError(f"unknown fit kind {kind!r}")
    path = out / f"fit_{kind.replace('-', '_')}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest.add_output(path)


_TASKS = {
    "steady": task_steady,
    "sweep": task_sweep,
    "phase-diagram": task_phase_diagram,
    "stability": task_stability,
    "island": task_island,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nec-lab",
        description="Cluster mean-field simulations of the dissipative NEC spin model",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for name in _TASKS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", default=None, help="output directory (overrides [run] out)")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--prescription", choices=("trace", "factorized"), default=None)
    fit = sub.add_parser("fit")
    fit.add_argument("--kind", required=True, choices=("boundary", "velocity", "linear-law"))
    fit.add_argument("--input", required=True, help="CSV produced by a previous run")
    fit.add_argument("--out", default="out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.task == "fit":
            out = Path(args.out)
            manifest = RunManifest("fit", f"fit kind={args.kind} input={args.input}\n", out)
            task_fit(args, manifest, out)
            manifest.write()
            return 0
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        if args.prescription:
            cfg.prescription = args.prescription
        if args.threads:
            cfg.threads = args.threads
        if args.out:
            cfg.out = args.out
        validate_for_task(cfg, args.task)
        out = Path(cfg.out)
        manifest = RunManifest(args.task, cfg.to_ini(), out)
        _TASKS[args.task](cfg, manifest, out)
        manifest.write()
        return 0
    except SchemaError as exc:
        json.dump({"error": "schema", "problems": exc.problems}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except NecLabError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
