"""Calibration sweep for island relaxation times and velocity-law windows."""

import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from nec_lab import icmf
from nec_lab.generator import pack_generator
from nec_lab.operators import HamiltonianKind, HamiltonianSpec, build_cluster_operators, build_rates

SIZES = (4, 6, 8, 10)


def tau_point(args):
    omega, T, h, ell_down, t_max = args
    ops = build_cluster_operators(
        2, build_rates(1.0, T, h), HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=omega)
    )
    packed = pack_generator(ops)
    lat = icmf.init_island(20, 2, ell_down)
    traj = icmf.evolve_island(lat, packed, t_max)
    tau = icmf.relaxation_time(traj.times, traj.mz_global) if traj.converged else None
    return (omega, T, ell_down, tau, float(traj.mz_global[-1]), bool(traj.converged))


def main():
    t_fixed, o_fixed, h = 0.1, 0.1, 0.1
    o_window = [0.04, 0.07, 0.10, 0.13, 0.16]
    t_window = [0.04, 0.07, 0.10, 0.13, 0.16]
    tasks = []
    for om in o_window:
        for s in (0,) + SIZES:
            tasks.append((om, t_fixed, h, s, 800.0))
    for T in t_window:
        if T == t_fixed:
            continue
        for s in (0,) + SIZES:
            tasks.append((o_fixed, T, h, s, 800.0))
    t0 = time.time()
    with ProcessPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(tau_point, tasks))
    print(f"total wall {time.time() - t0:.0f}s", flush=True)
    by_point = {}
    for om, T, s, tau, mzf, conv in results:
        by_point.setdefault((om, T), {})[s] = (tau, mzf, conv)
    out = {}
    for (om, T), data in sorted(by_point.items()):
        tau0 = data[0][0]
        taus = [data[s][0] for s in SIZES]
        print(f"omega={om} T={T}: tau0={tau0} taus={taus} mz_f={data[10][1]:+.3f}")
        if any(t is None for t in taus) or tau0 is None:
            print("   -> unconverged point"); continue
        rel = [t - tau0 for t in taus]
        try:
            fit = icmf.fit_velocity(SIZES, rel)
            print(f"   rel fit: v={fit.v:.4f} R2={fit.r_squared:.4f}")
            out[f"{om}_{T}"] = {"v": fit.v, "r2": fit.r_squared, "taus": taus, "tau0": tau0}
        except Exception as exc:
            print(f"   rel fit failed: {exc}")
            try:
                fit = icmf.fit_velocity(SIZES, taus, r2_min=0.0)
                print(f"   raw fit (no gate): v={fit.v:.4f} R2={fit.r_squared:.4f}")
                out[f"{om}_{T}"] = {"v": fit.v, "r2": fit.r_squared, "taus": taus, "tau0": tau0}
            except Exception as exc2:
                print(f"   raw fit failed: {exc2}")
    json.dump(out, open("/tmp/calib_islands.json", "w"), indent=1)


if __name__ == "__main__":
    sys.exit(main())
