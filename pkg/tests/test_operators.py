"""Operator algebra: rates, projectors, jumps, Hamiltonians, couplings."""

import itertools

import numpy as np
import pytest

from conftest import (
    PD,
    PU,
    SM,
    SP,
    SX,
    SZ,
    basis_state,
    dissipator_dense,
    kron_op,
    majority_up_dense,
    random_density_matrix,
)
from nec_lab.errors import RateOutOfRange, SiteOutOfCluster
from nec_lab.operators import (
    BoundaryCoupling,
    CouplingKind,
    HamiltonianKind,
    HamiltonianSpec,
    build_cluster_operators,
    build_hamiltonian,
    build_rates,
    dephasing_jumps,
    global_spin_flip,
    majority_projectors,
    nec_jump_operators,
    product_op,
    site_index,
    sz_diagonal,
)


class TestRates:
    def test_direct_inversion(self):
        r = build_rates(1.0, 0.1, 0.1)
        assert r.gamma_nu_bar == pytest.approx(0.055, abs=1e-15)
        assert r.gamma_mu_bar == pytest.approx(0.045, abs=1e-15)
        assert r.gamma_nu == pytest.approx(0.945, abs=1e-15)
        assert r.gamma_mu == pytest.approx(0.955, abs=1e-15)

    def test_zero_noise_limit(self):
        r = build_rates(1.0, 0.0, 0.3)
        assert r.gamma_nu_bar == 0.0 and r.gamma_mu_bar == 0.0
        assert r.gamma_nu == 1.0 and r.gamma_mu == 1.0

    def test_out_of_range(self):
        with pytest.raises(RateOutOfRange):
            build_rates(1.0, 2.0, 0.5)
        with pytest.raises(RateOutOfRange):
            build_rates(0.0, 0.1, 0.0)

    def test_sum_rules_exact(self, rng):
        for _ in range(50):
            T = rng.uniform(0.0, 1.0)
            h = rng.uniform(-1.0, 1.0)
            g = rng.uniform(0.1, 3.0)
            r = build_rates(g, T, h)
            assert r.gamma_nu + r.gamma_nu_bar == pytest.approx(g, rel=1e-15)
            assert r.gamma_mu + r.gamma_mu_bar == pytest.approx(g, rel=1e-15)
            assert min(r.gamma_nu, r.gamma_mu, r.gamma_nu_bar, r.gamma_mu_bar) >= 0


class TestMajorityProjectors:
    SITES = ((0, 0), (1, 0), (0, 1))

    def test_completeness_idempotence_orthogonality(self):
        p_up, p_dn = majority_projectors(2, self.SITES)
        up, dn = p_up.to_dense(), p_dn.to_dense()
        eye = np.eye(16)
        assert np.allclose(up + dn, eye, atol=1e-15)
        assert np.allclose(up @ up, up, atol=1e-15)
        assert np.allclose(dn @ dn, dn, atol=1e-15)
        assert np.allclose(up @ dn, 0.0, atol=1e-15)
        assert np.allclose(up, up.conj().T, atol=1e-15)

    def test_matches_pauli_polynomial_form(self):
        # Independent construction from (2 + sum sz - prod sz)/4.
        p_up, _ = majority_projectors(2, self.SITES)
        sites = tuple(site_index(2, x, y) for x, y in self.SITES)
        assert np.allclose(p_up.to_dense(), majority_up_dense(4, sites), atol=1e-15)

    def test_action_on_basis_states(self):
        p_up, _ = majority_projectors(2, self.SITES)
        up_up_dn = basis_state(4, [0, 1])  # sites 0,1 up, site 2 down
        assert np.allclose(p_up.to_dense() @ up_up_dn, up_up_dn, atol=1e-15)
        all_dn = basis_state(4, [])
        assert np.allclose(p_up.to_dense() @ all_dn, 0.0, atol=1e-15)

    def test_uniform_mixture_trace(self):
        p_up, _ = majority_projectors(2, self.SITES)
        mix = np.eye(16) / 16.0
        assert p_up.expectation(mix) == pytest.approx(0.5, abs=1e-15)

    def test_site_out_of_cluster(self):
        with pytest.raises(SiteOutOfCluster):
            majority_projectors(2, ((0, 0), (2, 0), (0, 1)))
        with pytest.raises(SiteOutOfCluster):
            majority_projectors(2, ((0, 0), (0, 0), (0, 1)))


class TestJumpOperators:
    def test_reduced_equals_literal_exhaustive(self):
        """Reduced two-neighbor forms equal sigma^pm P_plaquette on 3 sites."""
        rates = build_rates(1.0, 0.3, 0.4)
        # ell=2 interior vertex (0,0): E=site 1, N=site 2.
        channels, _ = nec_jump_operators(rates, 2)
        interior = {c.channel: c for c in channels if c.vertex == (0, 0)}
        assert set(interior) == {"nu", "mu", "nu_bar", "mu_bar"}
        j, e, n = 0, 1, 2
        p_up = majority_up_dense(4, (j, e, n))
        p_dn = np.eye(16) - p_up
        literal = {
            "nu": kron_op(4, {j: SP}) @ p_up,
            "mu": kron_op(4, {j: SM}) @ p_dn,
            "nu_bar": kron_op(4, {j: SM}) @ p_up,
            "mu_bar": kron_op(4, {j: SP}) @ p_dn,
        }
        for name, ch in interior.items():
            assert np.allclose(ch.op.to_dense(), literal[name], atol=1e-15), name

    def test_action_on_basis_states(self):
        rates = build_rates(1.0, 0.2, 0.0)
        channels, _ = nec_jump_operators(rates, 2)
        nu = next(c for c in channels if c.channel == "nu")
        # |down_j up_E up_N> -> |up up up>
        src = 0b0110  # sites 1,2 up
        vec = np.zeros(16)
        vec[src] = 1.0
        out = nu.op.to_dense() @ vec
        assert out[0b0111] == pytest.approx(1.0)
        assert np.sum(np.abs(out)) == pytest.approx(1.0)
        # |down_j down_E up_N> -> 0
        vec = np.zeros(16)
        vec[0b0100] = 1.0
        assert np.allclose(nu.op.to_dense() @ vec, 0.0)

    def test_at_most_one_nonzero_per_column(self):
        rates = build_rates(1.0, 0.37, -0.21)
        ops = build_cluster_operators(2, rates, HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=0.1))
        all_ops = [c.op for c in ops.channels] + [op for _, op in ops.h_terms]
        all_ops += [b.on_op for b in ops.boundary]
        all_ops += [p.op for b in ops.boundary for p in b.probes]
        for op in all_ops:
            m = op.to_coo().tocsc()
            assert m.shape == (16, 16)
            assert np.all(np.diff(m.indptr) <= 1)

    def test_global_spin_flip_maps_h_to_minus_h(self):
        """X L X maps the channel set at (T, h) onto the set at (T, -h)."""
        rates = build_rates(1.0, 0.3, 0.4)
        flipped_rates = rates.flipped()
        ch_a, _ = nec_jump_operators(rates, 2)
        ch_b, _ = nec_jump_operators(flipped_rates, 2)
        partner = {"nu": "mu", "mu": "nu", "nu_bar": "mu_bar", "mu_bar": "nu_bar"}
        by_key_b = {(c.vertex, c.channel): c for c in ch_b}
        for c in ch_a:
            mate = by_key_b[(c.vertex, partner[c.channel])]
            lhs = np.sqrt(c.rate) * c.op.spin_flipped().to_dense()
            rhs = np.sqrt(mate.rate) * mate.op.to_dense()
            assert np.allclose(lhs, rhs, atol=1e-12)

    def test_hamiltonian_flip_invariance(self):
        for kind in (HamiltonianKind.XFIELD, HamiltonianKind.PXP_NEC, HamiltonianKind.PXP2D):
            spec = HamiltonianSpec(kind, omega=0.17)
            terms, _ = build_hamiltonian(spec, 2)
            h = sum(c * op.to_dense() for c, op in terms)
            h_flipped = sum(c * op.spin_flipped().to_dense() for c, op in terms)
            assert np.allclose(h, h_flipped, atol=1e-12), kind


class TestHamiltonian:
    def test_xfield_single_site(self):
        terms, couplings = build_hamiltonian(HamiltonianSpec(HamiltonianKind.XFIELD, omega=0.4), 1)
        assert couplings == []
        h = sum(c * op.to_dense() for c, op in terms)
        assert np.allclose(h, 0.4 * SX, atol=1e-15)

    def test_pxp_nec_interior_term_fully_inside(self):
        terms, _ = build_hamiltonian(HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=0.1), 2)
        # only anchor (0,0) is fully inside; two amplitude parts
        assert len(terms) == 2
        expected = 0.1 * kron_op(4, {2: PD, 0: SX, 1: PD}) + 0.1 * kron_op(4, {2: PU, 0: SX, 1: PU})
        total = sum(c * op.to_dense() for c, op in terms)
        assert np.allclose(total, expected, atol=1e-15)

    def test_pxp_nec_corner_coupling_probes(self):
        _, couplings = build_hamiltonian(HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=0.1), 2)
        corner = [c for c in couplings if c.vertex == (1, 1) and c.channel == "omega1"]
        assert len(corner) == 1
        (c,) = corner
        offsets = sorted(p.offset for p in c.probes)
        assert offsets == [(0, 1), (1, 0)]
        by_off = {p.offset: p for p in c.probes}
        # E leg lands on the west edge of the +e_x neighbor, N leg on the
        # south edge of the +e_y neighbor.
        assert np.allclose(by_off[(1, 0)].op.to_dense(), kron_op(4, {site_index(2, 0, 1): PD}))
        assert np.allclose(by_off[(0, 1)].op.to_dense(), kron_op(4, {site_index(2, 1, 0): PD}))
        on = c.on_op.to_dense()
        assert np.allclose(on, kron_op(4, {site_index(2, 1, 1): SX}), atol=1e-15)

    def test_pxp_nec_coupling_count_ell2(self):
        # Hand enumeration: anchors (1,0),(0,1),(1,1),(-1,0),(-1,1),(0,-1),(1,-1)
        # straddle the edge; each contributes one coupling per amplitude part.
        _, couplings = build_hamiltonian(HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=0.1), 2)
        assert len(couplings) == 14
        probe_entries = sum(len(c.probes) for c in couplings)
        assert probe_entries == 20

    def test_hermitian_on_cluster(self):
        for kind in (HamiltonianKind.XFIELD, HamiltonianKind.PXP2D, HamiltonianKind.PXP_NEC):
            ops = build_cluster_operators(
                2, build_rates(1.0, 0.1, 0.0), HamiltonianSpec(kind, omega=0.3)
            )
            h = ops.hamiltonian_on.toarray()
            assert np.allclose(h, h.conj().T, atol=1e-15), kind


class TestDephasing:
    def test_zero_rate_empty(self):
        assert dephasing_jumps(0.0, 2) == []

    def test_four_channels(self):
        chans = dephasing_jumps(0.1, 2)
        assert len(chans) == 4
        for ch in chans:
            m = ch.op.to_dense()
            assert ch.rate == 0.1
            assert np.allclose(m, m.conj().T, atol=1e-15)
            assert np.allclose(m @ m, np.eye(16), atol=1e-15)


class TestBoundaryDecomposition:
    """Partial-trace oracle: the coupling decomposition must reproduce the
    exact cross-cluster dissipator traced over the neighbor side."""

    @staticmethod
    def _joint_plaquette_ops(flip, table):
        """L on (cluster A of 2x2) x (cluster B of 2x2), vertex (1,0) in A,
        N=(1,1) in A, E=(2,0) on B's west edge.  Joint site k of B = 4 + k."""
        j, n_site, e_site = site_index(2, 1, 0), site_index(2, 1, 1), 4 + site_index(2, 0, 0)
        dim = 2**8
        acc = np.zeros((dim, dim), dtype=complex)
        for e_bit, n_bit in itertools.product((0, 1), repeat=2):
            if not table[e_bit + 2 * n_bit]:
                continue
            acc += kron_op(
                8,
                {
                    j: flip,
                    e_site: PU if e_bit else PD,
                    n_site: PU if n_bit else PD,
                },
            )
        return acc

    @pytest.mark.parametrize(
        "channel,flip,table",
        [
            ("nu", SP, (0, 0, 0, 1)),
            ("mu", SM, (1, 0, 0, 0)),
            ("nu_bar", SM, (0, 1, 1, 1)),
            ("mu_bar", SP, (1, 1, 1, 0)),
        ],
    )
    def test_traced_dissipator_both_sides(self, channel, flip, table, rng):
        rate = 0.73
        L = np.sqrt(rate) * self._joint_plaquette_ops(flip, table)
        rho_a = random_density_matrix(16, rng)
        rho_b = random_density_matrix(16, rng)
        rho = np.kron(rho_b, rho_a)  # site 0..3 -> A (LSB block), 4..7 -> B
        d_full = dissipator_dense(L, rho)
        # exact partial traces
        d_t = d_full.reshape(16, 16, 16, 16)  # (b_row, a_row, b_col, a_col)
        on_a_exact = np.trace(d_t, axis1=0, axis2=2)
        on_b_exact = np.trace(d_t.transpose(1, 0, 3, 2), axis1=0, axis2=2)

        rates = build_rates(1.0, 0.3, 0.2)
        scale = rate / getattr(rates, f"gamma_{channel}")
        _, couplings = nec_jump_operators(rates, 2)

        # A side: vertex (1,0) anchored couplings, probes on +e_x evaluated on B
        on_a = np.zeros((16, 16), dtype=complex)
        for c in couplings:
            if c.vertex != (1, 0) or c.channel != channel:
                continue
            assert c.kind == CouplingKind.DISSIPATIVE_RATE
            eff = c.base * scale
            for p in c.probes:
                assert p.offset == (1, 0)
                eff *= p.op.expectation(rho_b).real
            on_a += eff * dissipator_dense(c.on_op.to_dense(), rho_a)
        assert np.allclose(on_a, on_a_exact, atol=1e-12), channel

        # B side: same plaquette seen from B is anchored at (-1, 0)
        on_b = np.zeros((16, 16), dtype=complex)
        for c in couplings:
            if c.vertex != (-1, 0) or c.channel != channel:
                continue
            assert c.kind == CouplingKind.DISSIPATIVE_BACKACTION
            eff = c.base * scale
            for p in c.probes:
                assert p.offset == (-1, 0)
                eff *= p.op.expectation(rho_a).real
            on_b += eff * dissipator_dense(c.on_op.to_dense(), rho_b)
        assert np.allclose(on_b, on_b_exact, atol=1e-12), channel

    def test_corner_plaquette_three_clusters(self, rng):
        """ell=1 clusters A, B (+e_x), D (+e_y): rate is a two-probe product."""
        rates = build_rates(1.0, 0.3, 0.2)
        _, couplings = nec_jump_operators(rates, 1)
        rho_a = random_density_matrix(2, rng)
        rho_b = random_density_matrix(2, rng)
        rho_d = random_density_matrix(2, rng)
        # joint space: site 0 = A, site 1 = B(E leg), site 2 = D(N leg)
        rho = np.kron(rho_d, np.kron(rho_b, rho_a))
        tables = {
            "nu": (SP, (0, 0, 0, 1)),
            "mu": (SM, (1, 0, 0, 0)),
            "nu_bar": (SM, (0, 1, 1, 1)),
            "mu_bar": (SP, (1, 1, 1, 0)),
        }
        gamma = {
            "nu": rates.gamma_nu,
            "mu": rates.gamma_mu,
            "nu_bar": rates.gamma_nu_bar,
            "mu_bar": rates.gamma_mu_bar,
        }
        d_exact = np.zeros((8, 8), dtype=complex)
        for name, (flip, table) in tables.items():
            L = np.zeros((8, 8), dtype=complex)
            for e_bit, n_bit in itertools.product((0, 1), repeat=2):
                if table[e_bit + 2 * n_bit]:
                    L += kron_op(3, {0: flip, 1: PU if e_bit else PD, 2: PU if n_bit else PD})
            d_exact += gamma[name] * dissipator_dense(L, rho)
        dt = d_exact.reshape(4, 2, 4, 2)
        on_a_exact = np.trace(dt, axis1=0, axis2=2)

        neighbor_state = {(1, 0): rho_b, (0, 1): rho_d}
        on_a = np.zeros((2, 2), dtype=complex)
        for c in couplings:
            if c.vertex != (0, 0):
                continue
            eff = c.base
            for p in c.probes:
                eff *= p.op.expectation(neighbor_state[p.offset]).real
            on_a += eff * dissipator_dense(c.on_op.to_dense(), rho_a)
        assert np.allclose(on_a, on_a_exact, atol=1e-12)


class TestCouplingCounts:
    """Frozen counts from hand enumeration of straddling plaquettes (ell=2,
    PXP-NEC, all four rates nonzero)."""

    def test_counts(self):
        ops = build_cluster_operators(
            2, build_rates(1.0, 0.3, 0.2), HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=0.1)
        )
        kinds = {k: [b for b in ops.boundary if b.kind == k] for k in CouplingKind}
        assert len(ops.channels) == 4  # one interior vertex, four channels
        assert len(kinds[CouplingKind.HAMILTONIAN_FIELD]) == 14
        assert len(kinds[CouplingKind.DISSIPATIVE_RATE]) == 20
        assert len(kinds[CouplingKind.DISSIPATIVE_BACKACTION]) == 16
        probe_entries = sum(len(b.probes) for b in ops.boundary)
        assert probe_entries == 72

    def test_probe_invariants(self):
        ops = build_cluster_operators(
            2, build_rates(1.0, 0.3, 0.2), HamiltonianSpec(HamiltonianKind.PXP_NEC, omega=0.1)
        )
        for b in ops.boundary:
            for p in b.probes:
                m = p.op.to_dense()
                assert np.allclose(m, m.conj().T, atol=1e-15)
                if b.kind != CouplingKind.HAMILTONIAN_FIELD:
                    # projector probes
                    assert np.allclose(m @ m, m, atol=1e-15)
            if b.kind == CouplingKind.DISSIPATIVE_BACKACTION:
                on = b.on_op.to_dense()
                assert np.allclose(on @ on, on, atol=1e-15)


class TestMisc:
    def test_sz_diagonal(self):
        d = sz_diagonal(2)
        assert d[0] == -4 and d[0b1111] == 4 and d[0b0011] == 0

    def test_product_op_matches_kron(self, rng):
        for _ in range(10):
            sites = rng.choice(4, size=2, replace=False)
            codes = rng.choice(["x", "z", "+", "-", "Pu", "Pd"], size=2)
            op = product_op(2, {int(s): str(c) for s, c in zip(sites, codes)})
            dense_map = {"x": SX, "z": SZ, "+": SP, "-": SM, "Pu": PU, "Pd": PD}
            expected = kron_op(4, {int(s): dense_map[str(c)] for s, c in zip(sites, codes)})
            assert np.allclose(op.to_dense(), expected, atol=1e-15)

    def test_dagger(self, rng):
        op = product_op(2, {0: "+", 1: "Pu", 3: "x"})
        assert np.allclose(op.dagger().to_dense(), op.to_dense().conj().T, atol=1e-15)

    def test_global_flip(self):
        x = global_spin_flip(2).to_dense()
        assert np.allclose(x @ x, np.eye(16), atol=1e-15)
