import numpy as np
import pytest

from trwmap.bench import (
    ALPHA_STEPS,
    CSV_COLUMNS,
    CSV_SCHEMA,
    GRID_SIGMA_D,
    GeneratorConfig,
    SweepAxes,
    panel_axes,
    generate,
    mean_p_cor,
    read_csv,
    run_trials,
    solve_trial,
    spearman,
    sweep,
    trial_seed,
    write_csv,
)
from trwmap.energy import EnergyModel, Parameters, is_submodular
from trwmap.oracle import verify_weak_persistency
from trwmap.trw import SolverConfig


def test_generator_is_deterministic():
    cfg = GeneratorConfig("grid", 4, 0.5, 0.7, 11)
    a, b = generate(cfg), generate(cfg)
    assert a == b
    assert generate(GeneratorConfig("grid", 4, 0.5, 0.7, 12)) != a


def test_generator_shapes_and_tables():
    model = generate(GeneratorConfig("complete", 5, 0.3, 1.0, 1))
    assert model.n == 5 and model.graph.edge_count == 10
    edge = model.params.edge
    assert (edge[:, 0, 0] == 0).all() and (edge[:, 1, 1] == 0).all()
    np.testing.assert_array_equal(edge[:, 0, 1], edge[:, 1, 0])


def test_alpha_extremes_control_submodularity():
    assert is_submodular(generate(GeneratorConfig("grid", 5, 1.0, 1.0, 3)))[0]
    lam = generate(GeneratorConfig("grid", 5, 0.0, 1.0, 3)).params.edge[:, 0, 1]
    assert (lam <= 0).all()


@pytest.mark.parametrize("kwargs", [dict(topology="ring"), dict(N=1), dict(alpha=1.5), dict(sigma=0.0)])
def test_generator_config_validation(kwargs):
    with pytest.raises(ValueError):
        GeneratorConfig(**kwargs)


def test_trial_seeds_are_shared_across_configurations():
    a = run_trials(GeneratorConfig("grid", 3, 0.2, 1.0, 5), 3, timing=False)
    b = run_trials(GeneratorConfig("grid", 3, 0.8, 1.0, 5), 3, timing=False)
    assert [r.seed for r in a] == [r.seed for r in b] == [trial_seed(5, i) for i in range(3)]
    assert len({r.seed for r in a}) == 3


def test_submodular_trials_fix_everything():
    records = run_trials(GeneratorConfig("grid", 4, 1.0, 2.0, 0), 5)
    assert mean_p_cor(records) == 1.0
    assert all(r.wta for r in records)


def test_threshold_fixing_is_persistent():
    for i in range(10):
        model = generate(GeneratorConfig("complete", 6, 0.5, 0.6, trial_seed(9, i)))
        _, _, _, partial = solve_trial(model, SolverConfig())
        assert verify_weak_persistency(model, partial.fixed)


def test_alpha_mirror_gauge_invariance():
    # flipping the labels of one grid colour class maps lambda -> -lambda
    # (up to a constant), i.e. an alpha instance onto a 1 - alpha instance
    for i in range(5):
        model = generate(GeneratorConfig("grid", 6, 0.3, 1.5, trial_seed(3, i)))
        side = 6
        black = np.array([(v // side + v % side) % 2 == 1 for v in range(model.n)])
        node = model.params.node.copy()
        node[black] = node[black][:, ::-1]
        mirrored = EnergyModel(model.graph, Parameters(0.0, node, -model.params.edge))
        _, _, ra, pa = solve_trial(model, SolverConfig())
        _, _, rb, pb = solve_trial(mirrored, SolverConfig())
        assert pa.fixed_count == pb.fixed_count
        assert {s: j ^ int(black[s]) for s, j in pa.fixed.items()} == pb.fixed
        shift = float(model.params.edge[:, 0, 1].sum())
        assert rb.bound == pytest.approx(ra.bound - shift, abs=1e-6)


def test_run_trials_requires_positive_count():
    with pytest.raises(ValueError):
        run_trials(GeneratorConfig(), 0)


def test_panel_axes():
    a = panel_axes("a")
    assert a.N == (4, 8, 16) and a.sigma_d == GRID_SIGMA_D and a.alpha == (0.5,)
    assert panel_axes("a", full_size=True).N[-1] == 128
    c = panel_axes("c")
    assert c.alpha == ALPHA_STEPS and len(ALPHA_STEPS) == 11
    assert panel_axes("d").N == (32,)
    with pytest.raises(ValueError):
        panel_axes("e")
    with pytest.raises(ValueError):
        SweepAxes(N=())


def test_csv_schema_and_determinism(tmp_path):
    axes = SweepAxes("grid", (3,), (0.0, 1.0), (2.0, 4.0), 2, 1)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(sweep(axes, timing=False), a)
    write_csv(sweep(axes, timing=False), b)
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == f"# {CSV_SCHEMA}"
    assert lines[1] == ",".join(CSV_COLUMNS)
    rows = read_csv(a)
    assert len(rows) == 2 * 2 * 2 + 4
    assert [r["trial"] for r in rows[-4:]] == ["mean"] * 4
    assert rows[0]["topology"] == "grid" and rows[0]["wall_ms"] == "0.0"


def test_read_csv_rejects_unknown_schema(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("topology,N\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_spearman():
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3], [1, 1, 1]) == 0.0
