"""Compare the compiled kernel against the pure-numpy fallback.

Both backends expose the same rhs_batch signature; this script times them
on identical inputs (single cluster, 4x4-cluster lattice, 10x10-cluster
lattice) and checks that they agree to floating-point accuracy.
"""

import importlib
import time

import numpy as np

from nec_lab import cmf
from nec_lab.generator import grid_neighbor_table, pack_generator
from nec_lab.operators import (
    HamiltonianKind,
    HamiltonianSpec,
    build_cluster_operators,
    build_rates,
)

numpy_backend = importlib.import_module("nec_lab._core.numpy_backend")
try:
    kernel = importlib.import_module("nec_lab._core._kernel")
except ImportError:
    kernel = None


def run_case(impl, packed, rho, neigh, repeats):
    out = np.empty_like(rho)
    cvals = np.empty((rho.shape[0], max(packed.n_probes, 1)))
    args = (
        rho, neigh,
        packed.probe_tgt, packed.probe_amp, packed.probe_slot,
        packed.h_tgt, packed.h_amp, packed.h_base, packed.h_pidx,
        packed.c_tgt, packed.c_amp, packed.c_absq, packed.c_base, packed.c_pidx,
        1, out, cvals,
    )
    impl.rhs_batch(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        impl.rhs_batch(*args)
    dt = (time.perf_counter() - t0) / repeats
    return dt, out.copy()


def main():
    rng = np.random.default_rng(7)
    ops = build_cluster_operators(
        2, build_rates(1.0, 0.15, 0.1), HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=0.1)
    )
    packed = pack_generator(ops)

    print(f"{'case':28s} {'numpy':>12s} {'cython':>12s} {'speedup':>9s}")
    for label, n_cells, repeats in (
        ("single cluster", 1, 2000),
        ("4x4 cluster lattice", 16, 400),
        ("10x10 cluster lattice", 100, 100),
    ):
        n = int(np.sqrt(n_cells))
        neigh = grid_neighbor_table(n, n, packed.offsets, periodic=True)
        rho = np.empty((n_cells, 16, 16), dtype=np.complex128)
        for m in range(n_cells):
            a = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
            r = a @ a.conj().T
            rho[m] = r / np.trace(r)
        t_np, out_np = run_case(numpy_backend, packed, rho, neigh, max(repeats // 20, 5))
        if kernel is None:
            print(f"{label:28s} {t_np * 1e6:10.1f}us   (extension not built)")
            continue
        t_cy, out_cy = run_case(kernel, packed, rho, neigh, repeats)
        err = np.max(np.abs(out_np - out_cy))
        assert err < 1e-12, f"backend mismatch {err:.3e}"
        print(f"{label:28s} {t_np * 1e6:10.1f}us {t_cy * 1e6:10.1f}us {t_np / t_cy:8.1f}x")
    print("backends agree to < 1e-12")


if __name__ == "__main__":
    main()
