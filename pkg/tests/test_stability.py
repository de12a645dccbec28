"""Bloch fluctuation matrix: Jacobian consistency, symmetries, spectra."""

import numpy as np
import pytest

from nec_lab import cmf
from nec_lab.errors import CapExceeded
from nec_lab.generator import pack_generator
from nec_lab.lindblad import vec
from nec_lab.operators import (
    HamiltonianKind,
    HamiltonianSpec,
    build_cluster_operators,
    build_rates,
)
from nec_lab.stability import (
    BlochMatrix,
    FluctuationOperator,
    brillouin_grid,
    build_bloch,
    mu_of_k,
    spectrum_symmetry_check,
)


def _ops(T=0.05, h=0.0, omega=0.05):
    return build_cluster_operators(
        2, build_rates(1.0, T, h), HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=omega)
    )


def _steady(ops, seed=None, prescription="trace"):
    packed = pack_generator(ops, prescription)
    res = cmf.ti_evolve(packed, cmf.all_up_state(2) if seed is None else seed)
    assert res.converged
    return res.state


def _fd_jacobian(rhs_fn, rho_ss, eps=1e-6):
    """Complex-linear Jacobian of the nonlinear flow by central differences
    along Hermitian directions (the flow is only defined on Hermitian
    matrices; its derivative is complex-linear and is reassembled from the
    symmetric and antisymmetric directions)."""
    dim = rho_ss.shape[0]
    n = dim * dim
    jac = np.zeros((n, n), dtype=complex)

    def deriv(direction):
        fp = rhs_fn((rho_ss + eps * direction)[None])[0]
        fm = rhs_fn((rho_ss - eps * direction)[None])[0]
        return (fp - fm) / (2 * eps)

    for a in range(dim):
        for b in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[a, b] = 1.0
            if a == b:
                col = deriv(e)
            else:
                sym = e + e.T
                asym = 1j * (e - e.T)
                col = (deriv(sym) - 1j * deriv(asym)) / 2.0
            jac[:, a + dim * b] = col.reshape(-1, order="F")
    return jac


class TestJacobianConsistency:
    @pytest.mark.parametrize("prescription", ["trace", "factorized"])
    def test_k_zero_matches_finite_differences(self, prescription):
        ops = _ops(T=0.05, h=0.0, omega=0.05)
        rho_ss = _steady(ops, prescription=prescription)
        packed = pack_generator(ops, prescription)
        jac = _fd_jacobian(cmf.make_rhs(packed), rho_ss)
        m0 = build_bloch(rho_ss, ops, (0.0, 0.0), prescription=prescription).matrix
        assert np.max(np.abs(m0 - jac)) < 1e-6


class TestStructure:
    def test_left_null_vector_at_any_k(self, rng):
        ops = _ops()
        rho_ss = _steady(ops)
        fluct = FluctuationOperator(ops, rho_ss)
        for _ in range(3):
            kx, ky = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
            m = fluct.bloch(kx, ky).matrix
            assert np.max(np.abs(vec(np.eye(16)) @ m)) < 1e-10

    def test_rank_one_term_count(self):
        ops = _ops(T=0.1, h=0.05, omega=0.1)
        rho_ss = _steady(ops)
        fluct = FluctuationOperator(ops, rho_ss)
        expected = sum(len(b.probes) for b in ops.boundary)
        assert fluct.n_terms == expected == 72

    def test_mu_nonnegative_zero_always_eigenvalue(self):
        ops = _ops()
        rho_ss = _steady(ops)
        fluct = FluctuationOperator(ops, rho_ss)
        for k in brillouin_grid(2, 5):
            assert fluct.mu(k, 0.3 * k) >= -1e-10

    def test_cap_exceeded_for_large_cluster(self):
        ops = build_cluster_operators(3, build_rates(1.0, 0.1, 0.0))
        with pytest.raises(CapExceeded):
            FluctuationOperator(ops, np.eye(512, dtype=complex) / 512)


class TestSpectrumSymmetry:
    def test_conjugation_symmetry_holds(self, rng):
        ops = _ops(T=0.08, h=0.1, omega=0.08)
        rho_ss = _steady(ops)
        fluct = FluctuationOperator(ops, rho_ss)
        for _ in range(2):
            kx, ky = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
            assert spectrum_symmetry_check(fluct.bloch(kx, ky), fluct.bloch(-kx, -ky))
        k0 = fluct.bloch(0.0, 0.0)
        assert spectrum_symmetry_check(k0, k0)

    def test_non_hermitian_probe_breaks_symmetry(self, rng):
        """Regression guard: pairing fluctuations with a non-Hermitian probe
        (e.g. probing with sigma^+ instead of a projector) violates the
        +-k conjugation symmetry."""
        ops = _ops(T=0.1, h=0.05, omega=0.12)
        rho_ss = _steady(ops)
        fluct = FluctuationOperator(ops, rho_ss)
        from nec_lab.operators import product_op

        bad_w = product_op(2, {0: "+"}).to_dense().T.reshape(-1, order="F")
        v = fluct.offset_blocks[(1, 0)][:, 0].copy()
        v[0] += 0.3  # arbitrary nonzero vector with a trace component removed below
        v = v - vec(np.eye(16)) * (vec(np.eye(16)) @ v) / 16.0
        outer = np.outer(v, bad_w)

        def mutated(kx):
            m = fluct.bloch(kx, 0.0).matrix.copy()
            m += np.exp(1j * kx) * outer
            return BlochMatrix(k=(kx, 0.0), matrix=m, n_terms=fluct.n_terms + 1)

        assert not spectrum_symmetry_check(mutated(0.9), mutated(-0.9))


class TestPhysicalSpectra:
    def test_deep_bistable_phase_is_stable(self):
        ops = _ops(T=0.05, h=0.0, omega=0.05)
        rho_ss = _steady(ops)
        grid = brillouin_grid(2, 9)
        table = mu_of_k(rho_ss, ops, grid, grid, workers=2)
        assert np.max(np.abs(table)) < 1e-8

    def test_deep_normal_phase_gapped(self):
        ops = _ops(T=0.6, h=0.0, omega=0.1)
        rho_ss = _steady(ops, seed=cmf.maximally_mixed(2))
        fluct = FluctuationOperator(ops, rho_ss)
        for k in (0.0, 0.7, -1.2):
            eig = np.linalg.eigvals(fluct.bloch(k, 0.0).matrix).real
            eig.sort()
            assert abs(eig[-1]) < 1e-8
            assert eig[-2] < -1e-3

    def test_brillouin_grid_shape(self):
        g = brillouin_grid(2, 65)
        assert g.size == 65
        assert abs(g[32]) < 1e-14
        assert g[0] > -np.pi / 2 and g[-1] < np.pi / 2
        assert np.allclose(g, -g[::-1])
