"""Random instance generators and the p_cor experiment harness."""

from __future__ import annotations

import csv
import itertools
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .certificates import FIX_THRESHOLD, fixed_vertices_by_threshold
from .decomposition import combine
from .energy import EnergyModel, Graph, Parameters
from .trw import SolverConfig, run

CSV_SCHEMA = "trwmap-sweep v1"
CSV_COLUMNS = ["topology", "N", "alpha", "sigma_d", "seed", "trial", "p_cor", "bound", "wta",
               "passes", "fixed_count", "wall_ms"]

GRID_SIGMA_D = (2.0, 4.0, 6.0, 8.0, 10.0)
COMPLETE_SIGMA_D = (1.0, 2.0, 3.0, 4.0, 5.0)
ALPHA_STEPS = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass(frozen=True)
class GeneratorConfig:
    topology: str = "grid"
    N: int = 4
    alpha: float = 0.5
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.topology not in ("grid", "complete"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def degree(self) -> int:
        return node_degree(self.topology, self.N)


def node_degree(topology: str, N: int) -> int:
    """Nominal degree used to convert sigma*d into sigma (4 for every grid)."""
    return 4 if topology == "grid" else N - 1


def build_graph(topology: str, N: int) -> Graph:
    return Graph.grid(N) if topology == "grid" else Graph.complete(N)


def generate(cfg: GeneratorConfig) -> EnergyModel:
    """Gaussian unary terms and zero-diagonal pairwise tables (0, l, l, 0).

    l = +|N(0, sigma^2)| with probability alpha, else -|N(0, sigma^2)|.
    """
    graph = build_graph(cfg.topology, cfg.N)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    node = rng.standard_normal((graph.vertex_count, 2))
    magnitude = np.abs(rng.normal(0.0, cfg.sigma, graph.edge_count))
    sign = np.where(rng.random(graph.edge_count) < cfg.alpha, 1.0, -1.0)
    lam = sign * magnitude
    edge = np.zeros((graph.edge_count, 2, 2))
    edge[:, 0, 1] = lam
    edge[:, 1, 0] = lam
    return EnergyModel(graph, Parameters(0.0, node, edge))


def trial_seed(master: int, trial: int) -> int:
    """Per-trial 64-bit seed; the same for every configuration of a sweep."""
    return int(np.random.SeedSequence([master, trial]).generate_state(1, dtype=np.uint64)[0])


@dataclass
class TrialRecord:
    topology: str
    N: int
    alpha: float
    sigma_d: float
    seed: int
    trial: int
    p_cor: float
    bound: float
    wta: bool
    passes: int
    fixed_count: int
    wall_ms: float


def solve_trial(model: EnergyModel, solver: SolverConfig, fix_threshold: float = FIX_THRESHOLD):
    """Run the solver and fix vertices whose theta_hat labels differ by more
    than ``fix_threshold``."""
    collection, state, report = run(model, config=solver)
    partial = fixed_vertices_by_threshold(combine(collection, state.decomposition), fix_threshold)
    return collection, state, report, partial


def run_trials(cfg: GeneratorConfig, trials: int, solver: SolverConfig | None = None,
               sigma_d: float | None = None, fix_threshold: float = FIX_THRESHOLD,
               timing: bool = True) -> list[TrialRecord]:
    """``cfg.seed`` is the master seed; trial i uses trial_seed(master, i)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    solver = solver or SolverConfig()
    if sigma_d is None:
        sigma_d = cfg.sigma * cfg.degree
    records = []
    for i in range(trials):
        seed = trial_seed(cfg.seed, i)
        model = generate(replace(cfg, seed=seed))
        start = time.perf_counter()
        _, _, report, partial = solve_trial(model, solver, fix_threshold)
        fixed = partial.fixed_count
        wall = (time.perf_counter() - start) * 1000.0 if timing else 0.0
        records.append(TrialRecord(cfg.topology, cfg.N, cfg.alpha, sigma_d, seed, i, fixed / model.n,
                                   report.bound, report.wta_reached, report.passes_run, fixed, wall))
    return records


def mean_p_cor(records: Sequence[TrialRecord]) -> float:
    return float(np.mean([r.p_cor for r in records]))


@dataclass(frozen=True)
class SweepAxes:
    topology: str = "grid"
    N: tuple[int, ...] = (4, 8, 16)
    alpha: tuple[float, ...] = (0.5,)
    sigma_d: tuple[float, ...] = GRID_SIGMA_D
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if not (self.N and self.alpha and self.sigma_d):
            raise ValueError("sweep axes must be non-empty")


def panel_axes(panel: str, full_size: bool = False, trials: int = 100, seed: int = 0) -> SweepAxes:
    """Axes of the four p_cor panels, shrunk to desk scale unless ``full_size``."""
    if panel == "a":
        sizes = (4, 8, 16, 32, 64, 128) if full_size else (4, 8, 16)
        return SweepAxes("grid", sizes, (0.5,), GRID_SIGMA_D, trials, seed)
    if panel == "b":
        sizes = (4, 8, 16, 32, 64, 128) if full_size else (4, 8, 16, 32)
        return SweepAxes("complete", sizes, (0.0,), COMPLETE_SIGMA_D, trials, seed)
    if panel == "c":
        return SweepAxes("grid", (32 if full_size else 16,), ALPHA_STEPS, GRID_SIGMA_D, trials, seed)
    if panel == "d":
        return SweepAxes("complete", (32,), ALPHA_STEPS, COMPLETE_SIGMA_D, trials, seed)
    raise ValueError(f"unknown panel {panel!r}")


def sweep(axes: SweepAxes, solver: SolverConfig | None = None, fix_threshold: float = FIX_THRESHOLD,
          timing: bool = True, progress=None) -> list[TrialRecord]:
    records = []
    for N, alpha, sd in itertools.product(axes.N, axes.alpha, axes.sigma_d):
        cfg = GeneratorConfig(axes.topology, N, alpha, sd / node_degree(axes.topology, N), axes.seed)
        batch = run_trials(cfg, axes.trials, solver, sigma_d=sd, fix_threshold=fix_threshold, timing=timing)
        if progress is not None:
            progress(cfg, batch)
        records.extend(batch)
    return records


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def aggregate(records: Sequence[TrialRecord]) -> list[dict]:
    """One mean row per (topology, N, alpha, sigma_d), in first-seen order."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.topology, r.N, r.alpha, r.sigma_d), []).append(r)
    rows = []
    for (topology, N, alpha, sd), batch in groups.items():
        rows.append({
            "topology": topology, "N": N, "alpha": alpha, "sigma_d": sd, "seed": "",
            "trial": "mean",
            "p_cor": float(np.mean([r.p_cor for r in batch])),
            "bound": float(np.mean([r.bound for r in batch])),
            "wta": float(np.mean([r.wta for r in batch])),
            "passes": float(np.mean([r.passes for r in batch])),
            "fixed_count": float(np.mean([r.fixed_count for r in batch])),
            "wall_ms": float(np.mean([r.wall_ms for r in batch])),
        })
    return rows


def write_csv(records: Sequence[TrialRecord], path) -> None:
    """Trial rows followed by mean rows; the first line names the schema version."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = asdict(r)
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        for row in aggregate(records):
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def read_csv(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {CSV_SCHEMA}":
            raise ValueError(f"unexpected CSV schema line {first!r}")
        return list(csv.DictReader(fh))


def spearman(x: Iterable[float], y: Iterable[float]) -> float:
    from scipy.stats import spearmanr

    x, y = list(x), list(y)
    if np.ptp(y) == 0:
        return 0.0
    return float(spearmanr(x, y).statistic)
