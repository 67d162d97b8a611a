"""Checkable optimality statements derived from a weak-tree-agreement fixed point.

* persistent (fixed) vertices and their completion to a global minimizer,
* min-marginal gap lower bounds for fixed vertices,
* both extreme completions for submodular energies,
* a point of the local polytope whose LP value matches the lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .decomposition import ThetaCollection, TreeDecomposition, combine
from .energy import EnergyModel, Graph, Parameters, is_submodular
from .errors import SizeLimitError, VerificationError
from .oracle import DEFAULT_LIMIT, brute_solve, constrained_min
from .tree import LocalSets, decode_tree_optimum
from .decomposition import Tree
from .trw import lower_bound

FIX_THRESHOLD = 1e-6
LOCAL_TOL = 1e-12
GAP_TOL = 1e-7


@dataclass(frozen=True)
class PartialLabeling:
    fixed: dict[int, int]
    free: tuple[int, ...]

    @classmethod
    def from_fixed(cls, fixed: Mapping[int, int], n: int) -> "PartialLabeling":
        fixed = {int(s): int(j) for s, j in sorted(fixed.items())}
        return cls(fixed, tuple(s for s in range(n) if s not in fixed))

    @property
    def fixed_count(self) -> int:
        return len(self.fixed)


def fixed_vertices(chi: LocalSets) -> PartialLabeling:
    fixed = {}
    for s in range(len(chi.node)):
        labels = chi.node_set(s)
        if len(labels) == 1:
            (fixed[s],) = labels
    return PartialLabeling.from_fixed(fixed, len(chi.node))


def fixed_vertices_by_threshold(theta_hat: Parameters, thresh: float = FIX_THRESHOLD) -> PartialLabeling:
    """Fix s to its cheaper label when |theta_hat_s0 - theta_hat_s1| > thresh."""
    diff = theta_hat.node[:, 0] - theta_hat.node[:, 1]
    fixed = {s: int(diff[s] > 0) for s in np.flatnonzero(np.abs(diff) > thresh)}
    return PartialLabeling.from_fixed(fixed, theta_hat.node.shape[0])


def _free_subproblem(graph: Graph, theta_hat: Parameters, free: tuple[int, ...]):
    index = {s: i for i, s in enumerate(free)}
    edges, tables = [], []
    for e, (s, t) in enumerate(graph.edges):
        if s in index and t in index:
            edges.append((index[s], index[t]))
            tables.append(theta_hat.edge[e])
    sub_graph = Graph(len(free), tuple(edges))
    sub = EnergyModel(sub_graph, Parameters(
        0.0, theta_hat.node[list(free)], np.asarray(tables).reshape(len(edges), 2, 2)))
    return sub


def _forest_components(graph: Graph) -> list[Tree] | None:
    """Spanning trees of each component, or None if the graph has a cycle."""
    n = graph.vertex_count
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for s, t in graph.edges:
        rs, rt = find(s), find(t)
        if rs == rt:
            return None
        parent[rs] = rt
    groups: dict[int, tuple[list[int], list[int]]] = {}
    for v in range(n):
        groups.setdefault(find(v), ([], []))[0].append(v)
    for e, (s, _) in enumerate(graph.edges):
        groups[find(s)][1].append(e)
    return [Tree(tuple(vs), tuple(es)) for vs, es in groups.values()]


def extend_to_full(model: EnergyModel, c: ThetaCollection, d: TreeDecomposition,
                   partial: PartialLabeling, limit: int = DEFAULT_LIMIT) -> np.ndarray:
    """Complete a persistent partial labeling to a global minimizer.

    Free vertices take an exact minimizer of theta_hat restricted to the
    subgraph they induce, solved by enumeration (up to ``limit`` vertices) or
    by tree decoding when that subgraph is a forest.
    """
    theta_hat = combine(c, d)
    x = np.zeros(model.n, dtype=np.int64)
    for s, j in partial.fixed.items():
        x[s] = j
    if not partial.free:
        return x
    sub = _free_subproblem(model.graph, theta_hat, partial.free)
    forest = _forest_components(sub.graph)
    if forest is not None:
        z = np.zeros(sub.n, dtype=np.int64)
        for tree in forest:
            # project onto the component; components are independent
            node = np.zeros_like(sub.params.node)
            node[list(tree.vertices)] = sub.params.node[list(tree.vertices)]
            edge = np.zeros_like(sub.params.edge)
            if tree.edges:
                edge[list(tree.edges)] = sub.params.edge[list(tree.edges)]
            for v, j in decode_tree_optimum(sub.graph, tree, Parameters(0.0, node, edge)).items():
                z[v] = j
    elif sub.n <= limit:
        z = brute_solve(sub, limit).optima[0].astype(np.int64)
    else:
        raise SizeLimitError(
            f"free subgraph has {sub.n} vertices and cycles; exact completion limited to {limit}")
    x[list(partial.free)] = z
    return x


def submodular_labelings(model: EnergyModel, partial: PartialLabeling) -> tuple[np.ndarray, np.ndarray]:
    """Fixed labels with every free vertex at 0, and with every free vertex at 1."""
    ok, violations = is_submodular(model)
    if not ok:
        raise VerificationError(f"energy is not submodular on edges {[st for st, _ in violations]}")
    x = np.zeros(model.n, dtype=np.int64)
    y = np.ones(model.n, dtype=np.int64)
    for s, j in partial.fixed.items():
        x[s] = y[s] = j
    return x, y


def min_marginal_gap(c: ThetaCollection, d: TreeDecomposition, s: int, j: int, chi: LocalSets) -> float:
    """C = sum_T rho(T) theta_{s;1-j}(T) for canonical trees.

    The min-marginal of the other label exceeds the optimum by at least C.
    """
    if chi.node_set(s) != frozenset({j}):
        raise ValueError(f"vertex {s} is not fixed to label {j}")
    return float(sum(r * p.node[s, 1 - j] for p, r in zip(c, d.rho)))


@dataclass(frozen=True, eq=False)
class DualSolution:
    const: float
    node: np.ndarray  # (n, 2)
    edge: np.ndarray  # (m, 2, 2), lower endpoint first

    def inner(self, p: Parameters) -> float:
        return float(p.const * self.const + np.sum(p.node * self.node) + np.sum(p.edge * self.edge))


def _edge_rule(pairs: frozenset) -> list[tuple[int, int]]:
    """Which pairs of an edge set carry mass, by the first matching rule."""
    matches = []
    if len(pairs) == 1:
        matches.append(sorted(pairs))
    for j in (0, 1):
        if pairs == {(j, 0), (j, 1)}:
            matches.append([(j, 0), (j, 1)])
    for k in (0, 1):
        if pairs == {(0, k), (1, k)}:
            matches.append([(0, k), (1, k)])
    diagonal = [[(j, k), (1 - j, 1 - k)] for j, k in ((0, 0), (0, 1)) if {(j, k), (1 - j, 1 - k)} <= pairs]
    if diagonal:
        # both diagonals present only when all four pairs are: one instance of the rule
        matches.append(diagonal[0])
    if len(matches) != 1:
        raise VerificationError(f"edge set {sorted(pairs)} matched {len(matches)} rules")
    return matches[0]


def dual_solution(chi: LocalSets, graph: Graph) -> DualSolution:
    n, m = graph.vertex_count, graph.edge_count
    node = np.zeros((n, 2))
    edge = np.zeros((m, 2, 2))
    for s in range(n):
        labels = chi.node_set(s)
        if not labels:
            raise VerificationError(f"empty label set at vertex {s}")
        for j in labels:
            node[s, j] = 1.0 / len(labels)
    for e in range(m):
        pairs = chi.edge_set(e)
        if not pairs:
            raise VerificationError(f"empty pair set at edge {graph.edges[e]}")
        support = _edge_rule(pairs)
        for j, k in support:
            edge[e, j, k] = 1.0 / len(support)
    return DualSolution(1.0, node, edge)


def verify_local_polytope(tau: DualSolution, g: Graph, tol: float = LOCAL_TOL) -> list[str]:
    problems = []
    if abs(tau.const - 1.0) > tol:
        problems.append(f"constant coordinate {tau.const} != 1")
    if (tau.node < -tol).any() or (tau.edge < -tol).any():
        problems.append("non-negativity violated")
    for s in range(g.vertex_count):
        if abs(tau.node[s].sum() - 1.0) > tol:
            problems.append(f"node normalization violated at {s} (sum {tau.node[s].sum()})")
    for e, (s, t) in enumerate(g.edges):
        table = tau.edge[e]
        if np.abs(table.sum(axis=1) - tau.node[s]).max() > tol:
            problems.append(f"marginalization onto {s} violated on edge {(s, t)}")
        if np.abs(table.sum(axis=0) - tau.node[t]).max() > tol:
            problems.append(f"marginalization onto {t} violated on edge {(s, t)}")
    return problems


def verify_global_optimality(model: EnergyModel, c: ThetaCollection, d: TreeDecomposition,
                             tau: DualSolution, tol: float = GAP_TOL) -> tuple[bool, float, float]:
    """Compare the lower bound of ``c`` with the LP value <theta_bar, tau>.

    Equality certifies that ``c`` maximizes the lower bound.
    """
    problems = verify_local_polytope(tau, model.graph)
    if problems:
        raise VerificationError("dual point infeasible: " + "; ".join(problems))
    primal = lower_bound(c, d, model.graph)
    dual = tau.inner(model.params)
    return abs(primal - dual) <= tol, primal, dual


def boundary_edge_residual(c: ThetaCollection, d: TreeDecomposition, graph: Graph,
                           partial: PartialLabeling) -> float:
    """Largest |theta_st(j_s, k)(T)| over edges from a fixed to a free vertex."""
    worst = 0.0
    for tree, p in zip(d.trees, c):
        for e in tree.edges:
            s, t = graph.edges[e]
            if (s in partial.fixed) == (t in partial.fixed):
                continue
            if s in partial.fixed:
                row = p.edge[e][partial.fixed[s], :]
            else:
                row = p.edge[e][:, partial.fixed[t]]
            worst = max(worst, float(np.abs(row).max()))
    return worst


@dataclass
class Statement:
    claim: str
    passed: bool
    detail: str = ""


@dataclass
class Certificate:
    partial: PartialLabeling
    bound: float
    dual: DualSolution | None
    dual_value: float | None
    gaps: dict[int, float]
    statements: list[Statement] = field(default_factory=list)
    labeling: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return all(st.passed for st in self.statements)

    def report(self) -> str:
        lines = ["# trwmap certificate"]
        lines.append(f"bound {self.bound!r}")
        lines.append(f"dual {self.dual_value!r}" if self.dual_value is not None else "dual none")
        lines.append(f"fixed {self.partial.fixed_count} free {len(self.partial.free)}")
        for s, j in self.partial.fixed.items():
            lines.append(f"fix {s} {j} gap {self.gaps.get(s, 0.0)!r}")
        if self.labeling is not None:
            lines.append("labeling " + "".join(str(int(v)) for v in self.labeling))
        for st in self.statements:
            tail = f"  # {st.detail}" if st.detail else ""
            lines.append(f"{'PASS' if st.passed else 'FAIL'} {st.claim}{tail}")
        return "\n".join(lines) + "\n"


def certify(model: EnergyModel, c: ThetaCollection, d: TreeDecomposition, chi: LocalSets | None,
            oracle_limit: int = 16, gap_tol: float = GAP_TOL) -> Certificate:
    """Collect every statement the fixed point supports and check each one."""
    from .energy import evaluate_energy

    bound = lower_bound(c, d, model.graph)
    statements = [Statement("weak tree agreement", chi is not None)]
    if chi is None:
        return Certificate(PartialLabeling.from_fixed({}, model.n), bound, None, None, {}, statements)

    statements.append(Statement("local sets arc-consistent", not chi.consistency_violations(model.graph)))
    partial = fixed_vertices(chi)
    gaps = {s: min_marginal_gap(c, d, s, j, chi) for s, j in partial.fixed.items()}

    tau = dual_solution(chi, model.graph)
    violations = verify_local_polytope(tau, model.graph)
    statements.append(Statement("dual point in local polytope", not violations, "; ".join(violations)))
    dual_value = None
    if not violations:
        ok, primal, dual_value = verify_global_optimality(model, c, d, tau, gap_tol)
        statements.append(Statement("lower bound equals LP value", ok, f"gap {abs(primal - dual_value):.3g}"))

    labeling = None
    submodular, _ = is_submodular(model)
    if submodular:
        x, y = submodular_labelings(model, partial)
        labeling = x
        ex, ey = evaluate_energy(model, x), evaluate_energy(model, y)
        statements.append(Statement("submodular completions attain the bound",
                                    abs(ex - bound) <= gap_tol and abs(ey - bound) <= gap_tol,
                                    f"E(x)={ex!r} E(y)={ey!r}"))
    else:
        try:
            labeling = extend_to_full(model, c, d, partial)
        except SizeLimitError as exc:
            statements.append(Statement("free subproblem solved exactly", False, str(exc)))

    if model.n <= oracle_limit:
        oracle = brute_solve(model, oracle_limit)
        statements.append(Statement("bound below oracle minimum", bound <= oracle.min_value + 1e-9))
        cmin = constrained_min(model, partial.fixed, oracle_limit)
        statements.append(Statement("fixed labels persistent (oracle)", cmin <= oracle.min_value + 1e-9,
                                    f"constrained {cmin!r} vs {oracle.min_value!r}"))
        if labeling is not None:
            e = evaluate_energy(model, labeling)
            statements.append(Statement("completion is a global minimizer (oracle)",
                                        e <= oracle.min_value + gap_tol, f"E={e!r}"))
    return Certificate(partial, bound, tau, dual_value, gaps, statements, labeling)
