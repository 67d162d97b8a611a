"""Brute-force ground truth by full enumeration of {0,1}^n."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .energy import EnergyModel, all_assignments, energies
from .errors import SizeLimitError

DEFAULT_LIMIT = 20
OPT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OracleResult:
    min_value: float
    optima: np.ndarray  # (k, n) int8, lexicographic
    node_min_marginals: np.ndarray  # (n, 2)
    edge_min_marginals: np.ndarray  # (m, 2, 2), lower endpoint first


def _check_limit(model: EnergyModel, limit: int) -> None:
    if model.n > limit:
        raise SizeLimitError(f"{model.n} vertices exceeds oracle limit {limit}")


def brute_solve(model: EnergyModel, limit: int = DEFAULT_LIMIT) -> OracleResult:
    _check_limit(model, limit)
    xs = all_assignments(model.n)
    values = energies(model, xs)
    best = float(values.min())
    optima = xs[values <= best + OPT_TOL]
    node = np.empty((model.n, 2))
    for s in range(model.n):
        col = xs[:, s]
        node[s, 0] = values[col == 0].min()
        node[s, 1] = values[col == 1].min()
    edge = np.empty((model.graph.edge_count, 2, 2))
    for e, (s, t) in enumerate(model.graph.edges):
        code = 2 * xs[:, s] + xs[:, t]
        for jk in range(4):
            edge[e, jk // 2, jk % 2] = values[code == jk].min()
    return OracleResult(best, optima, node, edge)


def constrained_min(model: EnergyModel, fixed: Mapping[int, int], limit: int = DEFAULT_LIMIT) -> float:
    """Minimum energy over labelings that agree with ``fixed``."""
    _check_limit(model, limit)
    xs = all_assignments(model.n)
    keep = np.ones(len(xs), dtype=bool)
    for s, j in fixed.items():
        keep &= xs[:, s] == j
    return float(energies(model, xs[keep]).min())


def verify_weak_persistency(model: EnergyModel, fixed: Mapping[int, int], limit: int = DEFAULT_LIMIT,
                            tol: float = 1e-9) -> bool:
    """True iff some global minimizer agrees with every fixed label."""
    return constrained_min(model, fixed, limit) <= brute_solve(model, limit).min_value + tol
