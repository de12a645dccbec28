"""Operator construction for the dissipative North-East-Center (NEC) model.

All operators act on an ``ell x ell`` cluster of spin-1/2 sites, Hilbert
space dimension ``2**(ell*ell)``.  Basis convention (fixed, bit-exact):
site ``(x, y)`` maps to bit ``x + ell*y`` of the basis index, site 0 is the
least significant bit, and bit value 1 encodes spin-up.

Every operator the model needs -- conditioned spin flips, projector
products, transverse-field terms -- has at most one nonzero entry per
column.  They are stored in that compressed column form (:class:`ColumnOp`)
rather than as generic sparse matrices, which bounds storage at one
amplitude per basis state and makes products, adjoints and expectation
values O(dim).

The NEC plaquette anchored at vertex ``j`` is ``{j, j+e_x, j+e_y}``.  Four
dissipative channels act on it: majority-aligning flips of the vertex spin
(rates ``gamma_nu`` up, ``gamma_mu`` down) and noisy flips against the
majority (rates ``gamma_nu_bar`` down, ``gamma_mu_bar`` up).  Plaquettes
that straddle the cluster edge are returned as :class:`BoundaryCoupling`
entries for the mean-field closure instead of on-cluster operators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import RateOutOfRange, SiteOutOfCluster

__all__ = [
    "E_X",
    "E_Y",
    "ColumnOp",
    "NecRates",
    "HamiltonianKind",
    "HamiltonianSpec",
    "CouplingKind",
    "Probe",
    "BoundaryCoupling",
    "JumpChannel",
    "ClusterOperatorSet",
    "build_rates",
    "site_index",
    "product_op",
    "majority_projectors",
    "nec_jump_operators",
    "build_hamiltonian",
    "dephasing_jumps",
    "build_cluster_operators",
    "global_spin_flip",
    "sz_diagonal",
]

E_X = (1, 0)
E_Y = (0, 1)

# Single-site action per opcode: entry[bit] = (new_bit, coeff) or None when
# the operator annihilates that spin state.
_OPMAP: dict[str, tuple[tuple[int, float] | None, tuple[int, float] | None]] = {
    "I": ((0, 1.0), (1, 1.0)),
    "x": ((1, 1.0), (0, 1.0)),
    "z": ((0, -1.0), (1, 1.0)),
    "+": ((1, 1.0), None),
    "-": (None, (0, 1.0)),
    "Pu": (None, (1, 1.0)),
    "Pd": ((0, 1.0), None),
}


def site_index(ell: int, x: int, y: int) -> int:
    """Linearized index of the cluster site (x, y)."""
    if not (0 <= x < ell and 0 <= y < ell):
        raise SiteOutOfCluster(f"site ({x}, {y}) outside {ell}x{ell} cluster")
    return x + ell * y


@dataclass(frozen=True)
class ColumnOp:
    """Sparse operator with at most one nonzero entry per column.

    ``matrix[target[c], c] = amp[c]`` for every basis column ``c``; a zero
    amplitude marks an annihilated column.  Closed under products and, for
    the flip-type operators used here, under the adjoint.
    """

    dim: int
    target: np.ndarray
    amp: np.ndarray

    def __post_init__(self):
        if self.target.shape != (self.dim,) or self.amp.shape != (self.dim,):
            raise ValueError("target/amp must have shape (dim,)")

    @classmethod
    def identity(cls, dim: int) -> "ColumnOp":
        return cls(dim, np.arange(dim, dtype=np.int64), np.ones(dim, dtype=np.complex128))

    def __matmul__(self, other: "ColumnOp") -> "ColumnOp":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        tgt = self.target[other.target]
        amp = self.amp[other.target] * other.amp
        return ColumnOp(self.dim, tgt, amp)

    def scaled(self, a: complex) -> "ColumnOp":
        return ColumnOp(self.dim, self.target, self.amp * a)

    def dagger(self) -> "ColumnOp":
        tgt = np.arange(self.dim, dtype=np.int64)
        amp = np.zeros(self.dim, dtype=np.complex128)
        nz = np.nonzero(self.amp)[0]
        cols = self.target[nz]
        if len(np.unique(cols)) != len(cols):
            raise ValueError("adjoint of a non-injective column map is not column form")
        tgt[cols] = nz
        amp[cols] = np.conj(self.amp[nz])
        return ColumnOp(self.dim, tgt, amp)

    def to_coo(self) -> sp.coo_matrix:
        nz = np.nonzero(self.amp)[0]
        return sp.coo_matrix(
            (self.amp[nz], (self.target[nz], nz)), shape=(self.dim, self.dim)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_coo().toarray()

    def expectation(self, rho: np.ndarray) -> complex:
        """tr(O rho) for a density matrix rho."""
        cols = np.arange(self.dim)
        return complex(np.sum(self.amp * rho[cols, self.target]))

    def is_zero(self) -> bool:
        return not np.any(self.amp)

    def spin_flipped(self) -> "ColumnOp":
        """Conjugation by the global flip X = prod_j sigma^x_j."""
        mask = self.dim - 1
        comp = mask - np.arange(self.dim)
        tgt = mask - self.target[comp]
        return ColumnOp(self.dim, tgt, self.amp[comp].copy())


def product_op(ell: int, factors: Mapping[int, str]) -> ColumnOp:
    """Product of commuting single-site factors, keyed by linearized site."""
    n_sites = ell * ell
    dim = 1 << n_sites
    cols = np.arange(dim, dtype=np.int64)
    tgt = cols.copy()
    amp = np.ones(dim, dtype=np.complex128)
    for s, code in factors.items():
        if not 0 <= s < n_sites:
            raise SiteOutOfCluster(f"site index {s} outside cluster of {n_sites} sites")
        table = _OPMAP[code]
        bit = (tgt >> s) & 1
        for b in (0, 1):
            entry = table[b]
            sel = bit == b
            if entry is None:
                amp[sel] = 0.0
            else:
                new_bit, coeff = entry
                if new_bit != b:
                    tgt[sel] ^= 1 << s
                if coeff != 1.0:
                    amp[sel] *= coeff
    return ColumnOp(dim, tgt, amp)


def _indicator(ell: int, sites: Sequence[int], table: Sequence[float]) -> ColumnOp:
    """Diagonal 0/1 operator from a truth table over the given sites.

    ``table`` is indexed by sum_k bit(sites[k]) << k.
    """
    n_sites = ell * ell
    dim = 1 << n_sites
    cols = np.arange(dim, dtype=np.int64)
    idx = np.zeros(dim, dtype=np.int64)
    for k, s in enumerate(sites):
        idx |= ((cols >> s) & 1) << k
    amp = np.asarray(table, dtype=np.complex128)[idx]
    return ColumnOp(dim, cols, amp)


def sz_diagonal(ell: int) -> np.ndarray:
    """Diagonal of sum_j sigma^z_j (spin-up bits count +1, down -1)."""
    n_sites = ell * ell
    dim = 1 << n_sites
    cols = np.arange(dim)
    pop = np.zeros(dim, dtype=np.int64)
    for s in range(n_sites):
        pop += (cols >> s) & 1
    return (2 * pop - n_sites).astype(np.float64)


def global_spin_flip(ell: int) -> ColumnOp:
    """X = prod_j sigma^x_j on the cluster."""
    return product_op(ell, {s: "x" for s in range(ell * ell)})


# ---------------------------------------------------------------------------
# Rates and Hamiltonian parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NecRates:
    """The four NEC channel rates derived from (gamma, T, h).

    T measures the total strength of the wrong (against-majority) moves and
    h their imbalance:

        gamma_nu_bar = gamma * T * (1 + h) / 2   (down-flip on up majority)
        gamma_mu_bar = gamma * T * (1 - h) / 2   (up-flip on down majority)

    with the sum rules gamma_nu + gamma_nu_bar = gamma_mu + gamma_mu_bar =
    gamma holding exactly.
    """

    gamma: float
    T: float
    h: float
    gamma_nu: float
    gamma_mu: float
    gamma_nu_bar: float
    gamma_mu_bar: float

    def flipped(self) -> "NecRates":
        """Rates at bias -h (the image under a global spin flip)."""
        return build_rates(self.gamma, self.T, -self.h)


def build_rates(gamma: float, T: float, h: float) -> NecRates:
    """Invert the (T, h) parameterization into the four channel rates."""
    if gamma <= 0:
        raise RateOutOfRange(f"gamma must be positive, got {gamma}")
    g_nu_bar = gamma * T * (1.0 + h) / 2.0
    g_mu_bar = gamma * T * (1.0 - h) / 2.0
    g_nu = gamma - g_nu_bar
    g_mu = gamma - g_mu_bar
    rates = {
        "gamma_nu": g_nu,
        "gamma_mu": g_mu,
        "gamma_nu_bar": g_nu_bar,
        "gamma_mu_bar": g_mu_bar,
    }
    for name, value in rates.items():
        if value < 0:
            raise RateOutOfRange(
                f"{name} = {value:.6g} < 0 for (gamma={gamma}, T={T}, h={h})"
            )
    return NecRates(gamma=gamma, T=T, h=h, **rates)


class HamiltonianKind(str, Enum):
    NONE = "none"
    XFIELD = "xfield"
    PXP2D = "pxp2d"
    PXP_NEC = "pxp_nec"


@dataclass(frozen=True)
class HamiltonianSpec:
    """Coherent part of the model, amplitudes in units of gamma.

    ``omega`` is the transverse-field amplitude for ``xfield`` and the
    common value of the blockade/anti-blockade amplitudes for the
    constrained kinds unless ``omega1``/``omega2`` override it.
    ``gamma_x`` adds an unconstrained dissipative sigma^x channel per site.
    """

    kind: HamiltonianKind = HamiltonianKind.NONE
    omega: float = 0.0
    omega1: float | None = None
    omega2: float | None = None
    gamma_x: float = 0.0

    @property
    def amp1(self) -> float:
        return self.omega if self.omega1 is None else self.omega1

    @property
    def amp2(self) -> float:
        return self.omega if self.omega2 is None else self.omega2


# ---------------------------------------------------------------------------
# Boundary couplings
# ---------------------------------------------------------------------------


class CouplingKind(Enum):
    HAMILTONIAN_FIELD = "hamiltonian_field"
    DISSIPATIVE_RATE = "dissipative_rate"
    DISSIPATIVE_BACKACTION = "dissipative_backaction"


@dataclass(frozen=True)
class Probe:
    """Operator to be evaluated on a neighboring cluster.

    ``offset`` is the neighbor's position in cluster units; corner plaquettes
    probe diagonal neighbors, e.g. (-1, 1).  ``factors`` keeps the
    (site, opcode) fingerprint so identical probes can be deduplicated.
    """

    op: ColumnOp = field(compare=False)
    offset: tuple[int, int]
    factors: tuple[tuple[int, str], ...]

    @property
    def key(self) -> tuple:
        return (self.offset, self.factors)


@dataclass(frozen=True)
class BoundaryCoupling:
    """One mean-field link created by a plaquette that straddles the edge.

    * HAMILTONIAN_FIELD: adds ``base * prod_p <probe_p>`` times ``on_op`` to
      the cluster Hamiltonian.
    * DISSIPATIVE_RATE: jump channel ``on_op`` with rate
      ``base * prod_p g(<probe_p>)`` where g depends on the closure
      prescription; every probe is a projector product.
    * DISSIPATIVE_BACKACTION: dephasing channel on the projector ``on_op``
      (the plaquette leg hosted by this cluster) whose rate probes the
      flip-vertex remainder on the anchoring cluster.
    """

    kind: CouplingKind
    on_op: ColumnOp = field(compare=False)
    probes: tuple[Probe, ...]
    base: float
    channel: str
    vertex: tuple[int, int]


@dataclass(frozen=True)
class JumpChannel:
    op: ColumnOp
    rate: float
    vertex: tuple[int, int]
    channel: str


# Channel truth tables over (east_bit, north_bit), index = e + 2n.
# Entry 1 means the flip is allowed for that neighbor configuration.
_CHANNEL_TABLE: dict[str, tuple[str, tuple[int, int, int, int]]] = {
    "nu": ("+", (0, 0, 0, 1)),
    "mu": ("-", (1, 0, 0, 0)),
    "nu_bar": ("-", (0, 1, 1, 1)),
    "mu_bar": ("+", (1, 1, 1, 0)),
}

# F^dag F of the flip operator, needed for back-action probes.
_FLIP_REMAINDER = {"+": "Pd", "-": "Pu"}


def majority_projectors(
    ell: int, plaquette_sites: Sequence[tuple[int, int]]
) -> tuple[ColumnOp, ColumnOp]:
    """Projectors onto up/down majority of three cluster sites.

    Complete (P_up + P_dn = 1), idempotent and orthogonal by construction.
    """
    if len(plaquette_sites) != 3 or len(set(plaquette_sites)) != 3:
        raise SiteOutOfCluster("need three distinct plaquette sites")
    sites = [site_index(ell, x, y) for (x, y) in plaquette_sites]
    table_up = [1.0 if bin(cfg).count("1") >= 2 else 0.0 for cfg in range(8)]
    table_dn = [1.0 - v for v in table_up]
    return _indicator(ell, sites, table_up), _indicator(ell, sites, table_dn)


def _cluster_offset(ell: int, x: int, y: int) -> tuple[int, int]:
    return (x // ell, y // ell)


def _local_site(ell: int, x: int, y: int) -> int:
    return (x % ell) + ell * (y % ell)


def _group_probes(
    ell: int, factors: Sequence[tuple[tuple[int, int], str]]
) -> tuple[Probe, ...]:
    """Group off-cluster single-site factors by host cluster offset."""
    groups: dict[tuple[int, int], list[tuple[int, str]]] = {}
    for (x, y), code in factors:
        off = _cluster_offset(ell, x, y)
        groups.setdefault(off, []).append((_local_site(ell, x, y), code))
    probes = []
    for off in sorted(groups):
        local = tuple(sorted(groups[off]))
        probes.append(Probe(op=product_op(ell, dict(local)), offset=off, factors=local))
    return tuple(probes)


def nec_jump_operators(
    rates: NecRates, ell: int
) -> tuple[list[JumpChannel], list[BoundaryCoupling]]:
    """All NEC dissipative terms touching one cluster.

    Plaquettes fully inside the cluster yield on-cluster jump channels in
    the reduced two-neighbor form (e.g. sigma^+_j P_up_E P_up_N for the
    majority up-flip).  Straddling plaquettes are decomposed exactly over
    the basis configurations of their off-cluster sites, yielding
    DISSIPATIVE_RATE couplings when the flip vertex is inside and
    DISSIPATIVE_BACKACTION dephasing couplings when only a projector leg is.
    """
    channels: list[JumpChannel] = []
    couplings: list[BoundaryCoupling] = []
    rate_of = {
        "nu": rates.gamma_nu,
        "mu": rates.gamma_mu,
        "nu_bar": rates.gamma_nu_bar,
        "mu_bar": rates.gamma_mu_bar,
    }
    for ax, ay in itertools.product(range(-1, ell), repeat=2):
        vertex = (ax, ay)
        legs = {"E": (ax + 1, ay), "N": (ax, ay + 1)}
        v_in = _cluster_offset(ell, ax, ay) == (0, 0)
        legs_in = {
            name: pos for name, pos in legs.items() if _cluster_offset(ell, *pos) == (0, 0)
        }
        if not v_in and not legs_in:
            continue
        for name, (flip_code, table) in _CHANNEL_TABLE.items():
            rate = rate_of[name]
            if rate == 0.0:
                continue
            if v_in:
                channels_or_couplings = _anchored_terms(
                    ell, vertex, legs, legs_in, flip_code, table, rate, name
                )
                for item in channels_or_couplings:
                    (channels if isinstance(item, JumpChannel) else couplings).append(item)
            else:
                couplings.extend(
                    _backaction_terms(ell, vertex, legs, legs_in, flip_code, table, rate, name)
                )
    return channels, couplings


def _table_value(table, e_bit, n_bit):
    return table[e_bit + 2 * n_bit]


def _anchored_terms(ell, vertex, legs, legs_in, flip_code, table, rate, name):
    """Plaquette with the flip vertex on-cluster."""
    j_site = site_index(ell, *vertex)
    out = [leg for leg in ("E", "N") if leg not in legs_in]
    flip = product_op(ell, {j_site: flip_code})
    if not out:
        sites = (site_index(ell, *legs["E"]), site_index(ell, *legs["N"]))
        cond = _indicator(ell, sites, table)
        yield JumpChannel(op=flip @ cond, rate=rate, vertex=vertex, channel=name)
        return
    kept = [leg for leg in ("E", "N") if leg in legs_in]
    for config in itertools.product((0, 1), repeat=len(out)):
        bits = dict(zip(out, config))
        if kept:
            leg = kept[0]
            reduced = [
                _table_value(
                    table,
                    b if leg == "E" else bits["E"],
                    b if leg == "N" else bits["N"],
                )
                for b in (0, 1)
            ]
            if not any(reduced):
                continue
            cond = _indicator(ell, (site_index(ell, *legs[leg]),), reduced)
            on_op = flip @ cond
        else:
            if not _table_value(table, bits["E"], bits["N"]):
                continue
            on_op = flip
        probe_factors = [
            (legs[leg], "Pu" if bits[leg] else "Pd") for leg in out
        ]
        yield BoundaryCoupling(
            kind=CouplingKind.DISSIPATIVE_RATE,
            on_op=on_op,
            probes=_group_probes(ell, probe_factors),
            base=rate,
            channel=name,
            vertex=vertex,
        )


def _backaction_terms(ell, vertex, legs, legs_in, flip_code, table, rate, name):
    """Plaquette anchored off-cluster with one projector leg on-cluster.

    Tracing the full dissipator over the anchor side leaves pure
    dephasing on the hosted leg: D[P_leg] with a rate given by the
    expectation of the flip-vertex remainder F^dag F times a projector
    selecting the off-cluster leg configurations that flip the channel
    on/off between the two on-leg spin states.
    """
    (leg_name, leg_pos), = legs_in.items()
    other = "N" if leg_name == "E" else "E"
    other_pos = legs[other]
    s_local = site_index(ell, *leg_pos)

    def g(leg_bit, other_bit):
        e = leg_bit if leg_name == "E" else other_bit
        n = other_bit if leg_name == "E" else leg_bit
        return _table_value(table, e, n)

    for on_code, sel in (
        ("Pu", [g(1, d) and not g(0, d) for d in (0, 1)]),
        ("Pd", [g(0, d) and not g(1, d) for d in (0, 1)]),
    ):
        if not any(sel):
            continue
        factors = [(vertex, _FLIP_REMAINDER[flip_code])]
        if not all(sel):
            factors.append((other_pos, "Pu" if sel[1] else "Pd"))
        yield BoundaryCoupling(
            kind=CouplingKind.DISSIPATIVE_BACKACTION,
            on_op=product_op(ell, {s_local: on_code}),
            probes=_group_probes(ell, factors),
            base=rate,
            channel=name,
            vertex=vertex,
        )


def build_hamiltonian(
    spec: HamiltonianSpec, ell: int
) -> tuple[list[tuple[float, ColumnOp]], list[BoundaryCoupling]]:
    """On-cluster Hamiltonian terms plus mean-field couplings.

    Every multi-site term is a product of single-site factors, so any part
    of it crossing the cluster edge factorizes into an on-cluster operator
    times expectations of the off-cluster factors (HAMILTONIAN_FIELD
    couplings).  The transverse-field kind is purely on-cluster.
    """
    terms: list[tuple[float, ColumnOp]] = []
    couplings: list[BoundaryCoupling] = []
    for coeff, factors, tag, vertex in _hamiltonian_raw_terms(spec, ell):
        groups: dict[tuple[int, int], list] = {}
        for (x, y), code in factors.items():
            groups.setdefault(_cluster_offset(ell, x, y), []).append(((x, y), code))
        if (0, 0) not in groups:
            continue
        on_factors = {
            _local_site(ell, x, y): code for (x, y), code in groups.pop((0, 0))
        }
        on_op = product_op(ell, on_factors)
        if not groups:
            terms.append((coeff, on_op))
            continue
        off_factors = [fc for group in groups.values() for fc in group]
        couplings.append(
            BoundaryCoupling(
                kind=CouplingKind.HAMILTONIAN_FIELD,
                on_op=on_op,
                probes=_group_probes(ell, off_factors),
                base=coeff,
                channel=tag,
                vertex=vertex,
            )
        )
    return terms, couplings


def _hamiltonian_raw_terms(
    spec: HamiltonianSpec, ell: int
) -> Iterator[tuple[float, dict, str, tuple[int, int]]]:
    kind = spec.kind
    if kind == HamiltonianKind.NONE:
        return
    if kind == HamiltonianKind.XFIELD:
        if spec.omega == 0.0:
            return
        for x, y in itertools.product(range(ell), repeat=2):
            yield spec.omega, {(x, y): "x"}, "omega", (x, y)
        return
    parts = [(spec.amp1, "Pd", "omega1"), (spec.amp2, "Pu", "omega2")]
    if kind == HamiltonianKind.PXP_NEC:
        for ax, ay in itertools.product(range(-1, ell), repeat=2):
            for amp, proj, tag in parts:
                if amp == 0.0:
                    continue
                yield amp, {
                    (ax, ay + 1): proj,
                    (ax, ay): "x",
                    (ax + 1, ay): proj,
                }, tag, (ax, ay)
        return
    if kind == HamiltonianKind.PXP2D:
        for ax, ay in itertools.product(range(-1, ell + 1), repeat=2):
            for amp, proj, tag in parts:
                if amp == 0.0:
                    continue
                yield amp, {
                    (ax - 1, ay): proj,
                    (ax, ay - 1): proj,
                    (ax, ay): "x",
                    (ax + 1, ay): proj,
                    (ax, ay + 1): proj,
                }, tag, (ax, ay)
        return
    raise ValueError(f"unknown Hamiltonian kind {kind!r}")


def dephasing_jumps(gamma_x: float, ell: int) -> list[JumpChannel]:
    """Unconstrained single-site sigma^x channels, one per site."""
    if gamma_x < 0:
        raise RateOutOfRange(f"gamma_x must be nonnegative, got {gamma_x}")
    if gamma_x == 0.0:
        return []
    return [
        JumpChannel(
            op=product_op(ell, {site_index(ell, x, y): "x"}),
            rate=gamma_x,
            vertex=(x, y),
            channel="x",
        )
        for x, y in itertools.product(range(ell), repeat=2)
    ]


@dataclass(frozen=True)
class ClusterOperatorSet:
    """Everything the mean-field generator of one cluster needs."""

    ell: int
    rates: NecRates
    hamiltonian: HamiltonianSpec
    h_terms: tuple[tuple[float, ColumnOp], ...]
    channels: tuple[JumpChannel, ...]
    boundary: tuple[BoundaryCoupling, ...]

    @property
    def dim(self) -> int:
        return 1 << (self.ell * self.ell)

    @property
    def hamiltonian_on(self) -> sp.csr_matrix:
        """On-cluster Hamiltonian as a sparse matrix."""
        acc = sp.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for coeff, op in self.h_terms:
            acc = acc + coeff * op.to_coo().tocsr()
        return acc

    @property
    def jumps_on(self) -> list[tuple[sp.csr_matrix, float]]:
        return [(ch.op.to_coo().tocsr(), ch.rate) for ch in self.channels]


def build_cluster_operators(
    ell: int, rates: NecRates, hamiltonian: HamiltonianSpec | None = None
) -> ClusterOperatorSet:
    """Assemble jump channels, Hamiltonian terms and boundary couplings."""
    if ell < 1:
        raise ValueError("cluster size must be at least 1")
    hamiltonian = hamiltonian or HamiltonianSpec()
    channels, couplings = nec_jump_operators(rates, ell)
    h_terms, h_couplings = build_hamiltonian(hamiltonian, ell)
    channels = channels + dephasing_jumps(hamiltonian.gamma_x, ell)
    return ClusterOperatorSet(
        ell=ell,
        rates=rates,
        hamiltonian=hamiltonian,
        h_terms=tuple(h_terms),
        channels=tuple(channels),
        boundary=tuple(couplings) + tuple(h_couplings),
    )
