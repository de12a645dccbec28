"""Cluster mean-field simulations of the dissipative quantum NEC model."""

__version__ = "0.1.0"

from .operators import (  # noqa: F401
    HamiltonianKind,
    HamiltonianSpec,
    NecRates,
    build_cluster_operators,
    build_rates,
)
