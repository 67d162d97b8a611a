"""Tree collections covering a graph, and the split/combine maps between a
model and a per-tree parameter collection."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .energy import EnergyModel, Graph, Parameters


@dataclass(frozen=True)
class Tree:
    """A subtree of a host graph. ``edges`` are host edge indices."""

    vertices: tuple[int, ...]
    edges: tuple[int, ...]

    def is_valid_in(self, graph: Graph) -> bool:
        verts = set(self.vertices)
        if len(verts) != len(self.vertices) or not verts:
            return False
        if len(set(self.edges)) != len(self.edges) or len(self.edges) != len(verts) - 1:
            return False
        if any(not 0 <= v < graph.vertex_count for v in verts):
            return False
        if any(not 0 <= e < graph.edge_count for e in self.edges):
            return False
        adj: dict[int, list[int]] = {v: [] for v in verts}
        for e in self.edges:
            s, t = graph.edges[e]
            if s not in verts or t not in verts:
                return False
            adj[s].append(t)
            adj[t].append(s)
        # |E| = |V| - 1 plus connectivity gives acyclicity
        start = self.vertices[0]
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return seen == verts


@dataclass(frozen=True, eq=False)
class TreeDecomposition:
    trees: tuple[Tree, ...]
    rho: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "trees", tuple(self.trees))

    def __len__(self) -> int:
        return len(self.trees)

    def node_weights(self, n: int) -> np.ndarray:
        """nu_s = sum of rho(T) over trees containing s."""
        nu = np.zeros(n)
        for tree, r in zip(self.trees, self.rho):
            nu[list(tree.vertices)] += r
        return nu

    def edge_weights(self, m: int) -> np.ndarray:
        nu = np.zeros(m)
        for tree, r in zip(self.trees, self.rho):
            if tree.edges:
                nu[list(tree.edges)] += r
        return nu

    def node_counts(self, n: int) -> np.ndarray:
        counts = np.zeros(n, dtype=np.int64)
        for tree in self.trees:
            counts[list(tree.vertices)] += 1
        return counts


def _isolated_trees(graph: Graph) -> list[Tree]:
    return [Tree((v,), ()) for v in range(graph.vertex_count) if not graph.adjacency(v)]


def build_edge_decomposition(graph: Graph) -> TreeDecomposition:
    """One tree per edge (plus one single-vertex tree per isolated vertex)."""
    if graph.edge_count == 0:
        raise ValueError("edge decomposition needs at least one edge")
    trees = [Tree((s, t), (e,)) for e, (s, t) in enumerate(graph.edges)]
    trees += _isolated_trees(graph)
    return TreeDecomposition(tuple(trees), np.full(len(trees), 1.0 / len(trees)), kind="edge")


def build_chain_decomposition(graph: Graph, order: Sequence[int] | None = None) -> TreeDecomposition:
    """Greedy cover of the edges by chains that are monotonic in ``order``.

    Vertices are visited in order. Chains ending at the current vertex are
    extended (oldest first) along uncovered edges to later neighbours, taken
    in order; edges left over open new chains. Each edge lands in exactly one
    chain.
    """
    n = graph.vertex_count
    if order is None:
        order = list(range(n))
    order = [int(v) for v in order]
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the vertices")
    pos = {v: i for i, v in enumerate(order)}

    chains: list[tuple[list[int], list[int]]] = []
    ending_at: dict[int, deque] = {v: deque() for v in range(n)}
    for v in order:
        outgoing = sorted(
            (pos[graph.other(e, v)], e) for e in graph.adjacency(v) if pos[graph.other(e, v)] > pos[v]
        )
        for _, e in outgoing:
            u = graph.other(e, v)
            if ending_at[v]:
                idx = ending_at[v].popleft()
                chains[idx][0].append(u)
                chains[idx][1].append(e)
            else:
                idx = len(chains)
                chains.append(([v, u], [e]))
            ending_at[u].append(idx)

    trees = [Tree(tuple(vs), tuple(es)) for vs, es in chains]
    trees += _isolated_trees(graph)
    return TreeDecomposition(tuple(trees), np.full(len(trees), 1.0 / len(trees)), kind="chain")


def build_decomposition(graph: Graph, kind: str = "chain", order: Sequence[int] | None = None) -> TreeDecomposition:
    if kind == "chain":
        return build_chain_decomposition(graph, order)
    if kind == "edge":
        return build_edge_decomposition(graph)
    raise ValueError(f"unknown decomposition kind {kind!r}")


def validate(d: TreeDecomposition, g: Graph) -> list[str]:
    """Return human-readable violations; empty means the decomposition is usable."""
    problems = []
    if len(d.rho) != len(d.trees):
        problems.append(f"rho has {len(d.rho)} entries for {len(d.trees)} trees")
        return problems
    if not d.trees:
        problems.append("no trees")
        return problems
    for i, (tree, r) in enumerate(zip(d.trees, d.rho)):
        if not tree.is_valid_in(g):
            problems.append(f"tree {i} is not a subtree of the graph")
        if not r > 0:
            problems.append(f"tree {i} has non-positive rho {r}")
    total = float(np.sum(d.rho))
    if abs(total - 1.0) > 1e-12:
        problems.append(f"rho not normalized (sum {total})")
    covered_edges = {e for tree in d.trees for e in tree.edges}
    for e, st in enumerate(g.edges):
        if e not in covered_edges:
            problems.append(f"uncovered edge {st}")
    covered_vertices = {v for tree in d.trees for v in tree.vertices}
    for v in range(g.vertex_count):
        if v not in covered_vertices:
            problems.append(f"uncovered vertex {v}")
    return problems


@dataclass(frozen=True, eq=False)
class ThetaCollection:
    """One full-length parameter vector per tree, zero outside the tree."""

    params: tuple[Parameters, ...]

    def __len__(self) -> int:
        return len(self.params)

    def __getitem__(self, i: int) -> Parameters:
        return self.params[i]

    def __iter__(self):
        return iter(self.params)


def _require_valid(d: TreeDecomposition, g: Graph) -> None:
    problems = validate(d, g)
    if problems:
        raise ValueError("invalid decomposition: " + "; ".join(problems))


def tree_mask(tree: Tree, graph: Graph) -> tuple[np.ndarray, np.ndarray]:
    node_mask = np.zeros(graph.vertex_count, dtype=bool)
    node_mask[list(tree.vertices)] = True
    edge_mask = np.zeros(graph.edge_count, dtype=bool)
    if tree.edges:
        edge_mask[list(tree.edges)] = True
    return node_mask, edge_mask


def project(params: Parameters, tree: Tree, graph: Graph) -> Parameters:
    """Zero every entry outside the tree's index set (constant kept)."""
    node_mask, edge_mask = tree_mask(tree, graph)
    return params.replace(
        node=np.where(node_mask[:, None], params.node, 0.0),
        edge=np.where(edge_mask[:, None, None], params.edge, 0.0),
    )


def is_tree_supported(params: Parameters, tree: Tree, graph: Graph) -> bool:
    node_mask, edge_mask = tree_mask(tree, graph)
    return not (params.node[~node_mask].any() or params.edge[~edge_mask].any())


def split_params(params: Parameters, graph: Graph, d: TreeDecomposition) -> ThetaCollection:
    """Share node/edge terms among the trees holding them, weighted so that
    sum_T rho(T) theta(T) reproduces ``params``; every tree keeps the constant."""
    nu_node = d.node_weights(graph.vertex_count)
    nu_edge = d.edge_weights(graph.edge_count)
    node_share = params.node / nu_node[:, None]
    edge_share = params.edge / np.where(nu_edge > 0, nu_edge, 1.0)[:, None, None]
    out = []
    for tree in d.trees:
        node_mask, edge_mask = tree_mask(tree, graph)
        out.append(
            Parameters(
                params.const,
                np.where(node_mask[:, None], node_share, 0.0),
                np.where(edge_mask[:, None, None], edge_share, 0.0),
            )
        )
    return ThetaCollection(tuple(out))


def split(model: EnergyModel, d: TreeDecomposition) -> ThetaCollection:
    _require_valid(d, model.graph)
    return split_params(model.params, model.graph, d)


def combine(c: ThetaCollection, d: TreeDecomposition) -> Parameters:
    """rho-weighted sum of the per-tree vectors."""
    if len(c) != len(d):
        raise ValueError(f"collection has {len(c)} trees, decomposition {len(d)}")
    first = c[0]
    const = 0.0
    node = np.zeros_like(first.node)
    edge = np.zeros_like(first.edge)
    for p, r in zip(c, d.rho):
        if p.node.shape != node.shape or p.edge.shape != edge.shape:
            raise ValueError("collection members index different graphs")
        const += r * p.const
        node += r * p.node
        edge += r * p.edge
    return Parameters(const, node, edge)
