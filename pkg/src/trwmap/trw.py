"""Sequential tree-reweighted min-sum message passing.

The solver keeps one normalized message per edge direction. The current
reparameterization is

    theta_hat_s(j)     = theta_s(j) + sum of messages into s
    theta_hat_st(j, k) = theta_st(j, k) - m_{s->t}(k) - m_{t->s}(j)

and each tree's share is theta_hat scaled by 1/nu, where nu sums rho over
the trees holding that vertex or edge. The lower bound is the rho-weighted
sum of the trees' exact minima.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .decomposition import (
    ThetaCollection,
    TreeDecomposition,
    build_decomposition,
    split_params,
    validate,
)
from .energy import EnergyModel, Graph, Parameters, as_assignment, evaluate_energy
from .errors import BoundDecreaseError
from .tree import (
    DEFAULT_EPS,
    LocalSets,
    _Rooted,
    to_canonical_normal_form,
    tree_min_value,
    tree_optimal_local_sets,
)

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    decomposition: str = "chain"
    order: Sequence[int] | None = None
    eps_opt: float = DEFAULT_EPS
    stall_window: int = 10
    max_passes: int = 1000
    bound_tol: float = 1e-12

    def __post_init__(self):
        if self.stall_window < 1:
            raise ValueError("stall_window must be >= 1")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.decomposition not in ("chain", "edge"):
            raise ValueError(f"unknown decomposition {self.decomposition!r}")


@dataclass
class SolverReport:
    bound_history: list[float] = field(default_factory=list)
    passes_run: int = 0
    terminated_by: str = "max_passes"
    wta_reached: bool = False

    @property
    def bound(self) -> float:
        return self.bound_history[-1] if self.bound_history else float("nan")


class MessageState:
    """Messages plus the flattened graph/decomposition arrays the kernels use."""

    def __init__(self, model: EnergyModel, d: TreeDecomposition, order: Sequence[int] | None = None):
        problems = validate(d, model.graph)
        if problems:
            raise ValueError("invalid decomposition: " + "; ".join(problems))
        g = model.graph
        n, m = g.vertex_count, g.edge_count
        self.model = model
        self.decomposition = d
        self.order = np.asarray(range(n) if order is None else order, dtype=np.int64)
        if sorted(self.order.tolist()) != list(range(n)):
            raise ValueError("order must be a permutation of the vertices")
        self.pos = np.empty(n, dtype=np.int64)
        self.pos[self.order] = np.arange(n)

        ends = np.asarray(g.edges, dtype=np.int64).reshape(m, 2)
        self.edge_s = np.ascontiguousarray(ends[:, 0])
        self.edge_t = np.ascontiguousarray(ends[:, 1])
        self.adj_ptr = np.zeros(n + 1, dtype=np.int64)
        adj = []
        for v in range(n):
            inc = sorted(g.adjacency(v), key=lambda e, v=v: self.pos[g.other(e, v)])
            adj.extend(inc)
            self.adj_ptr[v + 1] = len(adj)
        self.adj_edge = np.asarray(adj, dtype=np.int64)

        self.theta_node = np.ascontiguousarray(model.params.node, dtype=np.float64)
        self.theta_edge = np.ascontiguousarray(model.params.edge, dtype=np.float64)
        self.const = model.params.const
        self.gamma = 1.0 / d.node_counts(n).astype(np.float64)
        self.inv_nu_node = 1.0 / d.node_weights(n)
        nu_edge = d.edge_weights(m)
        self.inv_nu_edge = 1.0 / np.where(nu_edge > 0, nu_edge, 1.0)

        verts, vert_ptr = [], [0]
        post_c, post_p, post_e, post_ptr, roots = [], [], [], [0], []
        for tree in d.trees:
            rt = _Rooted(g, tree)
            verts.extend(tree.vertices)
            vert_ptr.append(len(verts))
            for v in reversed(rt.order[1:]):
                parent, e = rt.parent[v]
                post_c.append(v)
                post_p.append(parent)
                post_e.append(e)
            post_ptr.append(len(post_c))
            roots.append(rt.root)
        as_i = lambda a: np.asarray(a, dtype=np.int64)  # noqa: E731
        self.verts, self.vert_ptr = as_i(verts), as_i(vert_ptr)
        self.post_child, self.post_parent, self.post_edge = as_i(post_c), as_i(post_p), as_i(post_e)
        self.post_ptr, self.roots = as_i(post_ptr), as_i(roots)
        self.rho = np.asarray(d.rho, dtype=np.float64)

        self.msg = np.zeros((m, 2, 2))
        self.hat = np.zeros((n, 2))
        self._acc = np.zeros((n, 2))
        _kernels.refresh_beliefs(self.theta_node, self.edge_s, self.edge_t, self.msg, self.hat)

    def copy(self) -> "MessageState":
        other = object.__new__(MessageState)
        other.__dict__.update(self.__dict__)
        other.msg = self.msg.copy()
        other.hat = self.hat.copy()
        other._acc = np.zeros_like(self._acc)
        return other

    def theta_hat(self) -> Parameters:
        """The current reparameterization of the input model."""
        _kernels.refresh_beliefs(self.theta_node, self.edge_s, self.edge_t, self.msg, self.hat)
        return Parameters(self.const, self.hat.copy(), _kernels.reparameterized_edges(self.theta_edge, self.msg))

    def bound(self) -> float:
        return float(_kernels.tree_bound(
            self.const, self.rho, self.vert_ptr, self.verts, self.post_ptr, self.post_child,
            self.post_parent, self.post_edge, self.roots, self.edge_s, self.theta_edge,
            self.msg, self.hat, self.inv_nu_node, self.inv_nu_edge, self._acc,
        ))

    def collection(self, canonical: bool = True) -> ThetaCollection:
        """Per-tree shares of the current reparameterization."""
        g = self.model.graph
        raw = split_params(self.theta_hat(), g, self.decomposition)
        if not canonical:
            return raw
        return ThetaCollection(tuple(
            to_canonical_normal_form(g, tree, p) for tree, p in zip(self.decomposition.trees, raw)
        ))


def _scale(x: float) -> float:
    return max(1.0, abs(x))


def run_pass(state: MessageState, previous: float | None = None, bound_tol: float = 1e-12) -> float:
    """One forward and one backward sweep; returns the new lower bound.

    Raises BoundDecreaseError if the bound drops below ``previous`` by more
    than ``bound_tol`` (relative to max(1, |previous|)).
    """
    _kernels.refresh_beliefs(state.theta_node, state.edge_s, state.edge_t, state.msg, state.hat)
    for forward in (True, False):
        _kernels.sweep(state.order, state.pos, forward, state.edge_s, state.edge_t, state.adj_ptr,
                       state.adj_edge, state.theta_edge, state.gamma, state.msg, state.hat)
    _kernels.refresh_beliefs(state.theta_node, state.edge_s, state.edge_t, state.msg, state.hat)
    bound = state.bound()
    if previous is not None and bound < previous - bound_tol * _scale(previous):
        raise BoundDecreaseError(f"bound decreased from {previous!r} to {bound!r}")
    return bound


def lower_bound(c: ThetaCollection, d: TreeDecomposition, graph: Graph) -> float:
    """sum_T rho(T) * (optimal value of tree T), computed tree by tree."""
    total = 0.0
    for tree, p, r in zip(d.trees, c, d.rho):
        total += r * tree_min_value(graph, tree, to_canonical_normal_form(graph, tree, p))
    return float(total)


def run(model: EnergyModel, d: TreeDecomposition | None = None, config: SolverConfig | None = None):
    """Iterate passes until the bound stalls for ``stall_window`` passes or
    ``max_passes`` is hit.

    Returns (canonical ThetaCollection, MessageState, SolverReport).
    """
    config = config or SolverConfig()
    if d is None:
        d = build_decomposition(model.graph, config.decomposition, config.order)
    state = MessageState(model, d, config.order)
    report = SolverReport()
    # zero messages are not a normal form of the chains, so the first pass
    # may lower the bound; monotonicity is tracked from pass 1 on
    best = previous = None
    stall = 0
    for _ in range(config.max_passes):
        bound = run_pass(state, previous, config.bound_tol)
        report.bound_history.append(bound)
        report.passes_run += 1
        previous = bound
        if best is None or bound > best + config.bound_tol * _scale(best):
            best = bound
            stall = 0
        else:
            stall += 1
            if stall >= config.stall_window:
                report.terminated_by = "stall"
                break
    collection = state.collection(canonical=True)
    chi = wta_local_sets(collection, d, model.graph, config.eps_opt)
    report.wta_reached = chi is not None
    log.debug("trw: %d passes, bound %.12g, %s, wta=%s", report.passes_run, report.bound,
              report.terminated_by, report.wta_reached)
    return collection, state, report


def _intersect_across_trees(per_tree: list[np.ndarray], members: list[list[int]], size: int) -> np.ndarray:
    out = np.full(size, -1, dtype=np.int64)
    for i, masks in enumerate(per_tree):
        for idx in members[i]:
            out[idx] &= masks[idx]
    return out


def prune_local_sets(graph: Graph, d: TreeDecomposition, per_tree: list[LocalSets]) -> LocalSets | None:
    """Shrink per-tree optimal sets to a consistent family.

    Alternates intersection across trees sharing a vertex or edge with arc
    consistency inside each tree until nothing changes. Returns None if any
    set empties.
    """
    n, m = graph.vertex_count, graph.edge_count
    node_members = [list(t.vertices) for t in d.trees]
    edge_members = [list(t.edges) for t in d.trees]
    node_masks = [ls.node.copy() for ls in per_tree]
    edge_masks = [ls.edge.copy() for ls in per_tree]
    while True:
        chi_node = _intersect_across_trees(node_masks, node_members, n)
        chi_edge = _intersect_across_trees(edge_masks, edge_members, m)
        changed = False
        for i, tree in enumerate(d.trees):
            nm, em = node_masks[i], edge_masks[i]
            for v in tree.vertices:
                nm[v] = chi_node[v]
            for e in tree.edges:
                em[e] = chi_edge[e]
            local_change = True
            while local_change:
                local_change = False
                for e in tree.edges:
                    s, t = graph.edges[e]
                    keep = 0
                    for j in (0, 1):
                        for k in (0, 1):
                            bit = 1 << (2 * j + k)
                            if em[e] & bit and nm[s] >> j & 1 and nm[t] >> k & 1:
                                keep |= bit
                    if keep != em[e]:
                        em[e] = keep
                        local_change = True
                    support_s = (1 if keep & 0b0011 else 0) | (2 if keep & 0b1100 else 0)
                    support_t = (1 if keep & 0b0101 else 0) | (2 if keep & 0b1010 else 0)
                    if nm[s] & ~support_s:
                        nm[s] &= support_s
                        local_change = True
                    if nm[t] & ~support_t:
                        nm[t] &= support_t
                        local_change = True
            for v in tree.vertices:
                if nm[v] != chi_node[v]:
                    changed = True
            for e in tree.edges:
                if em[e] != chi_edge[e]:
                    changed = True
        if not changed:
            break
    if (chi_node[chi_node >= 0] == 0).any() or (chi_edge[chi_edge >= 0] == 0).any():
        return None
    return LocalSets(np.where(chi_node < 0, 0, chi_node), np.where(chi_edge < 0, 0, chi_edge))


def wta_local_sets(c: ThetaCollection, d: TreeDecomposition, graph: Graph,
                   eps: float = DEFAULT_EPS) -> LocalSets | None:
    """Optimal local sets of the largest consistent family of per-tree
    optima, or None when no such family exists (weak tree agreement fails)."""
    per_tree = [tree_optimal_local_sets(graph, tree, p, eps) for tree, p in zip(d.trees, c)]
    return prune_local_sets(graph, d, per_tree)


def strong_agreement(c: ThetaCollection, d: TreeDecomposition, graph: Graph, chi: LocalSets,
                     eps: float = DEFAULT_EPS) -> np.ndarray | None:
    """Try to pick one labeling optimal for every tree at once.

    Greedy in vertex order: each vertex takes the smallest label in its set
    that forms an allowed pair with every already-labeled neighbour. The
    result is returned only if it attains every tree's optimum.
    """
    n = graph.vertex_count
    x = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        for j in sorted(chi.node_set(v)):
            ok = True
            for e in graph.adjacency(v):
                u = graph.other(e, v)
                if x[u] < 0:
                    continue
                pair = (j, int(x[u])) if graph.edges[e][0] == v else (int(x[u]), j)
                if pair not in chi.edge_set(e):
                    ok = False
                    break
            if ok:
                x[v] = j
                break
        if x[v] < 0:
            return None
    x = as_assignment(x, n)
    for p in c:
        if evaluate_energy(EnergyModel(graph, p), x) > p.const + eps * n:
            return None
    return x
