import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_model
from trwmap.energy import (
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
from trwmap.errors import ParseError, SizeLimitError
from trwmap.trw import run


def reverse_order_energy(model, x):
    value = 0.0
    for e in reversed(range(model.graph.edge_count)):
        s, t = model.graph.edges[e]
        value += model.params.edge[e, x[s], x[t]]
    for s in reversed(range(model.n)):
        value += model.params.node[s, x[s]]
    return value + model.params.const


def ising_table(lam):
    return np.array([[0.0, lam], [lam, 0.0]])


def test_graph_canonical_orientation():
    g = Graph(3, ((2, 0), (1, 2)))
    assert g.edges == ((0, 2), (1, 2))
    assert g.edge_index(2, 0) == g.edge_index(0, 2) == 0


@pytest.mark.parametrize("edges", [((0, 0),), ((0, 1), (1, 0)), ((0, 3),)])
def test_graph_rejects_invalid_edges(edges):
    with pytest.raises(ValueError):
        Graph(3, edges)


def test_orientation_symmetry(rng):
    model = random_model(Graph.complete(4), rng)
    for s, t in model.graph.edges:
        for j in (0, 1):
            for k in (0, 1):
                assert model.edge_value(s, t, j, k) == model.edge_value(t, s, k, j)
        np.testing.assert_array_equal(model.edge_table(t, s), model.edge_table(s, t).T)


def test_zero_energy():
    g = Graph.grid(2)
    assert evaluate_energy(EnergyModel(g, Parameters.zeros(g)), [1, 0, 1, 1]) == 0.0


def test_single_node_energy():
    model = EnergyModel(Graph(1, ()), Parameters(1.0, [[0.0, 2.0]], np.zeros((0, 2, 2))))
    assert evaluate_energy(model, [1]) == 3.0


def test_energy_matches_reverse_sum(rng):
    model = random_model(Graph.grid(3), rng)
    for _ in range(20):
        x = rng.integers(0, 2, 9)
        assert evaluate_energy(model, x) == pytest.approx(reverse_order_energy(model, x), abs=1e-12)


def test_energy_rejects_wrong_length(rng):
    model = random_model(Graph.grid(2), rng)
    with pytest.raises(ValueError):
        evaluate_energy(model, [0, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_energy_is_affine_in_parameters(seed):
    rng = np.random.default_rng(seed)
    g = Graph.grid(3)
    a, b = random_model(g, rng), random_model(g, rng)
    x = rng.integers(0, 2, g.vertex_count)
    total = evaluate_energy(a.with_params(a.params + b.params), x)
    assert total == pytest.approx(evaluate_energy(a, x) + evaluate_energy(b, x), abs=1e-12)


def test_edge_invariant_values():
    g = Graph(2, ((0, 1),))
    model = EnergyModel(g, Parameters(0.0, np.zeros((2, 2)), [ising_table(0.7)]))
    assert edge_invariant(model, 0) == pytest.approx(1.4)
    flat = EnergyModel(g, Parameters(0.0, np.zeros((2, 2)), [np.full((2, 2), 3.0)]))
    assert edge_invariant(flat, (1, 0)) == 0.0
    with pytest.raises(KeyError):
        edge_invariant(model, 5)


def test_edge_invariant_survives_message_passing(rng):
    model = random_model(Graph.grid(3), rng)
    _, state, _ = run(model)
    after = model.with_params(state.theta_hat())
    for e in range(model.graph.edge_count):
        assert edge_invariant(after, e) == pytest.approx(edge_invariant(model, e), abs=1e-9)


def test_submodularity_signs():
    g = Graph(3, ((0, 1), (1, 2)))
    good = EnergyModel(g, Parameters(0.0, np.zeros((3, 2)), [ising_table(0.5), ising_table(0.0)]))
    assert is_submodular(good) == (True, [])
    bad = EnergyModel(g, Parameters(0.0, np.zeros((3, 2)), [ising_table(0.5), ising_table(-0.25)]))
    ok, violations = is_submodular(bad)
    assert not ok
    assert violations == [((1, 2), -0.5)]


def test_submodularity_invariant_under_node_shifts(rng):
    model = random_model(Graph.complete(4), rng)
    table = model.params.edge.copy()
    # adding u(j) + v(k) to an edge table leaves the invariant unchanged
    table += rng.normal(size=(6, 2, 1)) + rng.normal(size=(6, 1, 2))
    shifted = model.with_params(model.params.replace(edge=table))
    assert is_submodular(shifted)[0] == is_submodular(model)[0]
    for e in range(6):
        assert edge_invariant(shifted, e) == pytest.approx(edge_invariant(model, e), abs=1e-12)


def test_check_reparameterization(rng):
    model = random_model(Graph.grid(2), rng)
    assert check_reparameterization(model, model)
    node = model.params.node.copy()
    node[1] -= 0.3
    moved = model.with_params(model.params.replace(const=model.params.const + 0.3, node=node))
    assert check_reparameterization(model, moved)
    offset = model.with_params(model.params.replace(const=model.params.const + 0.3))
    assert not check_reparameterization(model, offset)


def test_check_reparameterization_errors(rng):
    a = random_model(Graph.grid(2), rng)
    b = random_model(Graph.complete(4), rng)
    with pytest.raises(ValueError):
        check_reparameterization(a, b)
    with pytest.raises(SizeLimitError):
        check_reparameterization(a, a, limit=3)


def test_instance_round_trip(tmp_path, rng):
    model = random_model(Graph.grid(3), rng)
    path = tmp_path / "m.mrf"
    write_instance(model, path)
    assert read_instance(path) == model


def test_instance_comments_and_blank_lines(tmp_path):
    path = tmp_path / "m.mrf"
    path.write_text("# header comment\nbinary-mrf 1\n\nn 2 m 1  # sizes\nc 0.5\nv 0 0 1\nv 1 2 3\n"
                    "e 0 1 0 1 1 0\n")
    model = read_instance(path)
    assert model.params.const == 0.5
    assert evaluate_energy(model, [1, 0]) == 0.5 + 1 + 2 + 1


BASE = "binary-mrf 1\nn 2 m 1\nc 0\nv 0 0 0\nv 1 0 0\n"


@pytest.mark.parametrize("body, line", [
    (BASE + "e 0 1 0 0 0 0\ne 0 1 0 0 0 0\n", 7),
    (BASE + "e 0 2 0 0 0 0\n", 6),
    (BASE + "e 1 0 0 0 0 0\n", 6),
    ("binary-mrf 1\nn 3 m 0\nc 0\nv 0 0 0\nv 1 0 0\n", 5),
    (BASE + "e 0 1 0 0 zero 0\n", 6),
    ("binary-mrf 2\n", 1),
])
def test_instance_parse_errors(tmp_path, body, line):
    path = tmp_path / "bad.mrf"
    path.write_text(body)
    with pytest.raises(ParseError) as info:
        read_instance(path)
    assert info.value.line == line
