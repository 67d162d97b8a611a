"""Exact and partially-certified MAP inference for binary pairwise MRFs via
sequential tree-reweighted message passing."""

from .energy import (
    EnergyModel,
    Graph,
    Parameters,
    check_reparameterization,
    edge_invariant,
    evaluate_energy,
    is_submodular,
    read_instance,
    write_instance,
)
from .trw import SolverConfig, SolverReport, run, wta_local_sets

__all__ = [
    "EnergyModel",
    "Graph",
    "Parameters",
    "SolverConfig",
    "SolverReport",
    "check_reparameterization",
    "edge_invariant",
    "evaluate_energy",
    "is_submodular",
    "read_instance",
    "run",
    "write_instance",
    "wta_local_sets",
]
