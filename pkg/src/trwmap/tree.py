"""Exact min-sum on a single tree: min-marginals, canonical normal form,
optimal local sets and decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import Tree, is_tree_supported
from .energy import Graph, Parameters

DEFAULT_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class MinMarginals:
    """Exact min-marginals of a tree energy.

    ``node[s, j]`` and ``edge[e, j, k]`` are NaN for vertices/edges outside
    the tree. Edge entries use the host orientation (lower endpoint first).
    """

    node: np.ndarray
    edge: np.ndarray
    optimum: float


@dataclass(frozen=True, eq=False)
class LocalSets:
    """Per-vertex and per-edge sets of labels, stored as bitmasks.

    Node mask bit j means label j is present; edge mask bit 2*j + k means
    pair (j, k) is present, with j the label of the lower endpoint.
    """

    node: np.ndarray
    edge: np.ndarray

    def node_set(self, s: int) -> frozenset[int]:
        m = int(self.node[s])
        return frozenset(j for j in (0, 1) if m >> j & 1)

    def edge_set(self, e: int) -> frozenset[tuple[int, int]]:
        m = int(self.edge[e])
        return frozenset((j, k) for j in (0, 1) for k in (0, 1) if m >> (2 * j + k) & 1)

    @classmethod
    def from_sets(cls, node_sets, edge_sets) -> "LocalSets":
        node = np.array([sum(1 << j for j in s) for s in node_sets], dtype=np.int64)
        edge = np.array([sum(1 << (2 * j + k) for j, k in s) for s in edge_sets], dtype=np.int64)
        return cls(node, edge)

    def consistency_violations(self, graph: Graph, vertices=None, edges=None) -> list[str]:
        """Check arc consistency between node and edge sets."""
        edges = range(graph.edge_count) if edges is None else edges
        problems = []
        for e in edges:
            s, t = graph.edges[e]
            pairs = self.edge_set(e)
            ns, nt = self.node_set(s), self.node_set(t)
            for j, k in pairs:
                if j not in ns or k not in nt:
                    problems.append(f"edge {(s, t)} pair {(j, k)} unsupported by node sets")
            for j in ns:
                if not any(a == j for a, _ in pairs):
                    problems.append(f"vertex {s} label {j} has no pair on edge {(s, t)}")
            for k in nt:
                if not any(b == k for _, b in pairs):
                    problems.append(f"vertex {t} label {k} has no pair on edge {(s, t)}")
        return problems


class _Rooted:
    """Tree oriented away from its lowest-numbered vertex."""

    def __init__(self, graph: Graph, tree: Tree):
        self.root = min(tree.vertices)
        nbrs: dict[int, list[tuple[int, int]]] = {v: [] for v in tree.vertices}
        for e in tree.edges:
            s, t = graph.edges[e]
            nbrs[s].append((t, e))
            nbrs[t].append((s, e))
        self.nbrs = nbrs
        self.parent: dict[int, tuple[int, int] | None] = {self.root: None}
        self.order = [self.root]
        i = 0
        while i < len(self.order):
            v = self.order[i]
            i += 1
            for u, e in sorted(nbrs[v]):
                if u not in self.parent:
                    self.parent[u] = (v, e)
                    self.order.append(u)


def _oriented(p: Parameters, graph: Graph, e: int, a: int) -> np.ndarray:
    """Edge table indexed [x_a, x_other]."""
    table = p.edge[e]
    return table if graph.edges[e][0] == a else table.T


def _messages(graph: Graph, tree: Tree, p: Parameters):
    rt = _Rooted(graph, tree)
    up: dict[int, np.ndarray] = {}  # child -> message into parent, indexed by parent label
    inbox = {v: p.node[v].astype(float).copy() for v in tree.vertices}
    for v in reversed(rt.order[1:]):
        parent, e = rt.parent[v]
        table = _oriented(p, graph, e, v)
        msg = (inbox[v][:, None] + table).min(axis=0)
        up[v] = msg
        inbox[parent] = inbox[parent] + msg
    down: dict[int, np.ndarray] = {}  # child -> message from parent, indexed by child label
    for v in rt.order[1:]:
        parent, e = rt.parent[v]
        table = _oriented(p, graph, e, parent)
        belief = inbox[parent] - up[v]
        if rt.parent[parent] is not None:
            belief = belief + down[parent]
        down[v] = (belief[:, None] + table).min(axis=0)
    return rt, up, down, inbox


def _require_supported(graph: Graph, tree: Tree, p: Parameters) -> None:
    if not is_tree_supported(p, tree, graph):
        raise ValueError("parameters have non-zero entries outside the tree")


def tree_min_marginals(graph: Graph, tree: Tree, p: Parameters) -> MinMarginals:
    _require_supported(graph, tree, p)
    rt, up, down, inbox = _messages(graph, tree, p)
    node = np.full((graph.vertex_count, 2), np.nan)
    full = {}
    for v in tree.vertices:
        b = inbox[v] + (down[v] if v in down else 0.0)
        full[v] = b
        node[v] = p.const + b
    edge = np.full((graph.edge_count, 2, 2), np.nan)
    for v in rt.order[1:]:
        parent, e = rt.parent[v]
        # belief at v without parent's message, at parent without v's message
        bv = inbox[v]
        bp = full[parent] - up[v]
        table = _oriented(p, graph, e, v)
        joint = p.const + bv[:, None] + table + bp[None, :]
        edge[e] = joint if graph.edges[e][0] == v else joint.T
    optimum = float(p.const + full[rt.root].min())
    return MinMarginals(node, edge, optimum)


def to_canonical_normal_form(graph: Graph, tree: Tree, p: Parameters) -> Parameters:
    """Reparameterize a tree energy so that node minima are zero, edge
    minima of theta_s + theta_st + theta_t are zero, and the constant holds
    the tree's optimal value."""
    mm = tree_min_marginals(graph, tree, p)
    phi = mm.optimum
    node = np.zeros_like(p.node)
    edge = np.zeros_like(p.edge)
    verts = list(tree.vertices)
    node[verts] = mm.node[verts] - phi
    for e in tree.edges:
        s, t = graph.edges[e]
        edge[e] = mm.edge[e] - phi - node[s][:, None] - node[t][None, :]
    return Parameters(phi, node, edge)


def canonical_residuals(graph: Graph, tree: Tree, p: Parameters) -> float:
    """Largest violation of the fixed-point (zero constant) and zero-minimum conditions."""
    worst = 0.0
    for v in tree.vertices:
        worst = max(worst, abs(p.node[v].min()))
    for e in tree.edges:
        s, t = graph.edges[e]
        table = p.edge[e]
        worst = max(worst, abs((p.node[s][:, None] + table + p.node[t][None, :]).min()))
        # both directions of the min-sum fixed-point condition with zero constant
        worst = max(worst, np.abs((p.node[s][:, None] + table).min(axis=0)).max())
        worst = max(worst, np.abs((table + p.node[t][None, :]).min(axis=1)).max())
    return float(worst)


def tree_min_value(graph: Graph, tree: Tree, p_canonical: Parameters, tol: float = 1e-9) -> float:
    residual = canonical_residuals(graph, tree, p_canonical)
    if residual > tol:
        raise ValueError(f"parameters are not in canonical normal form (residual {residual:.3g})")
    return p_canonical.const


def tree_optimal_local_sets(graph: Graph, tree: Tree, p: Parameters, eps: float = DEFAULT_EPS) -> LocalSets:
    """Labels and label pairs whose min-marginal is within ``eps`` of the optimum.

    Entries for vertices/edges outside the tree are zero masks.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    mm = tree_min_marginals(graph, tree, p)
    node = np.zeros(graph.vertex_count, dtype=np.int64)
    edge = np.zeros(graph.edge_count, dtype=np.int64)
    for v in tree.vertices:
        gap = mm.node[v] - mm.optimum
        node[v] = int(gap[0] <= eps) | int(gap[1] <= eps) << 1
    for e in tree.edges:
        gap = (mm.edge[e] - mm.optimum).ravel()
        edge[e] = sum(1 << i for i in range(4) if gap[i] <= eps)
    return LocalSets(node, edge)


def decode_tree_optimum(graph: Graph, tree: Tree, p: Parameters) -> dict[int, int]:
    """A minimizing labeling of the tree's vertices; label 0 wins ties."""
    _require_supported(graph, tree, p)
    rt, up, _, inbox = _messages(graph, tree, p)
    x = {rt.root: int(inbox[rt.root][1] < inbox[rt.root][0])}
    for v in rt.order[1:]:
        parent, e = rt.parent[v]
        table = _oriented(p, graph, e, v)
        score = inbox[v] + table[:, x[parent]]
        x[v] = int(score[1] < score[0])
    return x
