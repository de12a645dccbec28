"""Second island calibration: factorized prescription + fine windows."""

import sys
import time
from concurrent.futures import ProcessPoolExecutor

from nec_lab import icmf
from nec_lab.generator import pack_generator
from nec_lab.operators import HamiltonianKind, HamiltonianSpec, build_cluster_operators, build_rates

SIZES = (4, 6, 8, 10)


def tau_point(args):
    prescription, omega, T, h, ell_down, t_max = args
    ops = build_cluster_operators(
        2, build_rates(1.0, T, h), HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=omega)
    )
    packed = pack_generator(ops, prescription)
    lat = icmf.init_island(20, 2, ell_down)
    traj = icmf.evolve_island(lat, packed, t_max)
    tau = icmf.relaxation_time(traj.times, traj.mz_global) if traj.converged else None
    return (prescription, omega, T, ell_down, tau, float(traj.mz_global[-1]), bool(traj.converged))


def main():
    h = 0.1
    tasks = []
    for om, T in [(0.1, 0.04), (0.1, 0.07), (0.1, 0.1), (0.1, 0.13), (0.1, 0.16),
                  (0.04, 0.1), (0.07, 0.1), (0.13, 0.1), (0.16, 0.1)]:
        for s in (0,) + SIZES:
            tasks.append(("factorized", om, T, h, s, 800.0))
    t0 = time.time()
    with ProcessPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(tau_point, tasks))
    print(f"total wall {time.time() - t0:.0f}s", flush=True)
    by_point = {}
    for presc, om, T, s, tau, mzf, conv in results:
        by_point.setdefault((om, T), {})[s] = (tau, mzf, conv)
    for (om, T), data in sorted(by_point.items()):
        tau0 = data[0][0]
        taus = [data[s][0] for s in SIZES]
        print(f"omega={om} T={T}: tau0={tau0} taus={taus} mz_f={data[10][1]:+.3f}")
        if any(t is None for t in taus) or tau0 is None:
            print("   -> unconverged point")
            continue
        rel = [t - tau0 for t in taus]
        try:
            fit = icmf.fit_velocity(SIZES, rel)
            print(f"   rel fit: v={fit.v:.4f} R2={fit.r_squared:.4f}")
        except Exception:
            fit = icmf.fit_velocity(SIZES, rel, r2_min=0.0)
            print(f"   rel fit (below gate): v={fit.v:.4f} R2={fit.r_squared:.4f}")


if __name__ == "__main__":
    sys.exit(main())
