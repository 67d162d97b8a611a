from __future__ import annotations

import itertools

import numpy as np
import pytest

from trwmap.decomposition import Tree
from trwmap.energy import EnergyModel, Graph, Parameters


def random_model(graph: Graph, rng: np.random.Generator, scale: float = 1.0) -> EnergyModel:
    """Fully general parameters, including constants and arbitrary edge tables."""
    return EnergyModel(graph, Parameters(
        rng.normal(),
        rng.normal(size=(graph.vertex_count, 2)),
        scale * rng.normal(size=(graph.edge_count, 2, 2)),
    ))


def mixed_model(graph: Graph, rng: np.random.Generator, alpha: float, sigma: float) -> EnergyModel:
    node = rng.normal(size=(graph.vertex_count, 2))
    lam = np.abs(rng.normal(0, sigma, graph.edge_count)) * np.where(rng.random(graph.edge_count) < alpha, 1, -1)
    edge = np.zeros((graph.edge_count, 2, 2))
    edge[:, 0, 1] = lam
    edge[:, 1, 0] = lam
    return EnergyModel(graph, Parameters(0.0, node, edge))


def random_tree_graph(n: int, rng: np.random.Generator) -> tuple[Graph, Tree]:
    """Random labelled tree on n vertices (each vertex attaches to an earlier one)."""
    perm = rng.permutation(n)
    edges = [(int(perm[i]), int(perm[rng.integers(i)])) for i in range(1, n)]
    graph = Graph(n, tuple(edges))
    return graph, Tree(tuple(range(n)), tuple(range(graph.edge_count)))


def brute_min_marginals(model: EnergyModel):
    """Straight-line enumeration used as an oracle independent of the package oracle."""
    n = model.n
    best = np.inf
    node = np.full((n, 2), np.inf)
    edge = np.full((model.graph.edge_count, 2, 2), np.inf)
    for bits in itertools.product((0, 1), repeat=n):
        value = model.params.const
        for s in range(n):
            value += model.params.node[s, bits[s]]
        for e, (s, t) in enumerate(model.graph.edges):
            value += model.params.edge[e, bits[s], bits[t]]
        best = min(best, value)
        for s in range(n):
            node[s, bits[s]] = min(node[s, bits[s]], value)
        for e, (s, t) in enumerate(model.graph.edges):
            edge[e, bits[s], bits[t]] = min(edge[e, bits[s], bits[t]], value)
    return best, node, edge


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
