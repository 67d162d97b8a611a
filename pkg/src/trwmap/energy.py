"""Binary pairwise energies in the overcomplete (const, node, edge) parameterization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, SizeLimitError

TOL = 1e-9

FORMAT_HEADER = "binary-mrf 1"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph; every edge is stored as (s, t) with s < t."""

    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    _index: dict = field(init=False, repr=False, compare=False)
    _adjacency: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.vertex_count < 1:
            raise ValueError("graph needs at least one vertex")
        edges = []
        index = {}
        for s, t in self.edges:
            s, t = int(s), int(t)
            if s == t:
                raise ValueError(f"self-loop at vertex {s}")
            if s > t:
                s, t = t, s
            if s < 0 or t >= self.vertex_count:
                raise ValueError(f"edge ({s}, {t}) out of range for {self.vertex_count} vertices")
            if (s, t) in index:
                raise ValueError(f"duplicate edge ({s}, {t})")
            index[(s, t)] = len(edges)
            edges.append((s, t))
        adjacency = [[] for _ in range(self.vertex_count)]
        for e, (s, t) in enumerate(edges):
            adjacency[s].append(e)
            adjacency[t].append(e)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adjacency))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self, s: int) -> tuple[int, ...]:
        """Indices of edges incident to ``s``."""
        return self._adjacency[s]

    def neighbors(self, s: int) -> list[int]:
        return [self.other(e, s) for e in self._adjacency[s]]

    def other(self, e: int, s: int) -> int:
        a, b = self.edges[e]
        return b if a == s else a

    def edge_index(self, s: int, t: int) -> int:
        key = (s, t) if s < t else (t, s)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"no edge ({s}, {t})") from None

    def has_edge(self, s: int, t: int) -> bool:
        return ((s, t) if s < t else (t, s)) in self._index

    @classmethod
    def grid(cls, side: int) -> "Graph":
        edges = []
        for r in range(side):
            for c in range(side):
                v = r * side + c
                if c + 1 < side:
                    edges.append((v, v + 1))
                if r + 1 < side:
                    edges.append((v, v + side))
        return cls(side * side, tuple(edges))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, tuple(itertools.combinations(range(n), 2)))


@dataclass(frozen=True, eq=False)
class Parameters:
    """theta_const, per-vertex (theta_s0, theta_s1) and per-edge 2x2 tables.

    Edge tables are indexed ``edge[e, j, k]`` with j the label of the lower
    endpoint. Arrays are read-only; use :meth:`replace` to derive new values.
    """

    const: float
    node: np.ndarray
    edge: np.ndarray

    def __post_init__(self):
        node = _frozen(self.node).reshape(-1, 2)
        edge = _frozen(self.edge).reshape(-1, 2, 2)
        object.__setattr__(self, "const", float(self.const))
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "edge", edge)
        if not (np.isfinite(self.const) and np.isfinite(node).all() and np.isfinite(edge).all()):
            raise ValueError("parameters must be finite")

    @classmethod
    def zeros(cls, graph: Graph) -> "Parameters":
        return cls(0.0, np.zeros((graph.vertex_count, 2)), np.zeros((graph.edge_count, 2, 2)))

    def replace(self, const=None, node=None, edge=None) -> "Parameters":
        return Parameters(
            self.const if const is None else const,
            self.node if node is None else node,
            self.edge if edge is None else edge,
        )

    def __add__(self, other: "Parameters") -> "Parameters":
        return Parameters(self.const + other.const, self.node + other.node, self.edge + other.edge)

    def __sub__(self, other: "Parameters") -> "Parameters":
        return Parameters(self.const - other.const, self.node - other.node, self.edge - other.edge)

    def __mul__(self, scale: float) -> "Parameters":
        return Parameters(self.const * scale, self.node * scale, self.edge * scale)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Parameters):
            return NotImplemented
        return (
            self.const == other.const
            and np.array_equal(self.node, other.node)
            and np.array_equal(self.edge, other.edge)
        )

    def allclose(self, other: "Parameters", atol: float = 1e-12) -> bool:
        return (
            abs(self.const - other.const) <= atol
            and np.allclose(self.node, other.node, rtol=0, atol=atol)
            and np.allclose(self.edge, other.edge, rtol=0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class EnergyModel:
    graph: Graph
    params: Parameters

    def __post_init__(self):
        if self.params.node.shape[0] != self.graph.vertex_count:
            raise ValueError("node terms do not match vertex count")
        if self.params.edge.shape[0] != self.graph.edge_count:
            raise ValueError("edge terms do not match edge count")

    @property
    def n(self) -> int:
        return self.graph.vertex_count

    def __eq__(self, other) -> bool:
        if not isinstance(other, EnergyModel):
            return NotImplemented
        return self.graph == other.graph and self.params == other.params

    def with_params(self, params: Parameters) -> "EnergyModel":
        return EnergyModel(self.graph, params)

    def edge_value(self, s: int, t: int, j: int, k: int) -> float:
        """theta_{st;jk} for either orientation of the edge."""
        e = self.graph.edge_index(s, t)
        if s < t:
            return float(self.params.edge[e, j, k])
        return float(self.params.edge[e, k, j])

    def edge_table(self, s: int, t: int) -> np.ndarray:
        """2x2 table indexed [x_s, x_t]."""
        e = self.graph.edge_index(s, t)
        table = self.params.edge[e]
        return table if s < t else table.T


def as_assignment(x: Iterable[int], n: int) -> np.ndarray:
    x = np.asarray(list(x) if not isinstance(x, np.ndarray) else x, dtype=np.int64)
    if x.shape != (n,):
        raise ValueError(f"assignment has shape {x.shape}, expected ({n},)")
    if ((x != 0) & (x != 1)).any():
        raise ValueError("labels must be 0 or 1")
    return x


def evaluate_energy(model: EnergyModel, x: Sequence[int]) -> float:
    x = as_assignment(x, model.n)
    p = model.params
    value = p.const + p.node[np.arange(model.n), x].sum()
    if model.graph.edge_count:
        ends = np.asarray(model.graph.edges)
        value += p.edge[np.arange(len(ends)), x[ends[:, 0]], x[ends[:, 1]]].sum()
    return float(value)


def edge_invariant(model: EnergyModel, e) -> float:
    """theta_01 + theta_10 - theta_00 - theta_11 for edge ``e`` (index or vertex pair).

    Unchanged by any reparameterization of a binary energy.
    """
    if isinstance(e, tuple):
        e = model.graph.edge_index(*e)
    elif not 0 <= e < model.graph.edge_count:
        raise KeyError(f"no edge with index {e}")
    t = model.params.edge[e]
    return float(t[0, 1] + t[1, 0] - t[0, 0] - t[1, 1])


def is_submodular(model: EnergyModel, tol: float = 0.0) -> tuple[bool, list[tuple[tuple[int, int], float]]]:
    """Check theta_00 + theta_11 <= theta_01 + theta_10 on every edge.

    Returns the verdict and the violating edges with their (negative) slack.
    """
    violations = []
    for e, st in enumerate(model.graph.edges):
        slack = edge_invariant(model, e)
        if slack < -tol:
            violations.append((st, slack))
    return not violations, violations


def all_assignments(n: int) -> np.ndarray:
    """All 2**n labelings in lexicographic order, vertex 0 most significant."""
    codes = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def check_reparameterization(a: EnergyModel, b: EnergyModel, limit: int = 20, tol: float = TOL) -> bool:
    """Exhaustively compare E(x; a) and E(x; b) over all labelings."""
    if a.graph != b.graph:
        raise ValueError("models live on different graphs")
    if a.n > limit:
        raise SizeLimitError(f"{a.n} vertices exceeds exhaustive limit {limit}")
    diff = a.with_params(a.params - b.params)
    return bool(np.abs(energies(diff, all_assignments(a.n))).max() <= tol)


def energies(model: EnergyModel, xs: np.ndarray) -> np.ndarray:
    """Vectorised energy of every row of ``xs``."""
    p = model.params
    xs = np.asarray(xs)
    out = np.full(xs.shape[0], p.const)
    for s in range(model.n):
        out += p.node[s][xs[:, s]]
    for e, (s, t) in enumerate(model.graph.edges):
        out += p.edge[e][xs[:, s], xs[:, t]]
    return out


def write_instance(model: EnergyModel, path) -> None:
    p = model.params
    lines = [FORMAT_HEADER, f"n {model.n} m {model.graph.edge_count}", f"c {p.const!r}"]
    for s in range(model.n):
        lines.append(f"v {s} {float(p.node[s, 0])!r} {float(p.node[s, 1])!r}")
    for e, (s, t) in enumerate(model.graph.edges):
        t00, t01, t10, t11 = (repr(float(v)) for v in p.edge[e].ravel())
        lines.append(f"e {s} {t} {t00} {t01} {t10} {t11}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _floats(tokens, lineno):
    try:
        return [float(tok) for tok in tokens]
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def _ints(tokens, lineno):
    try:
        return [int(tok) for tok in tokens]
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def read_instance(path) -> EnergyModel:
    text = Path(path).read_text(encoding="utf-8")
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows or " ".join(rows[0][1]) != FORMAT_HEADER:
        raise ParseError(f"expected header '{FORMAT_HEADER}'", rows[0][0] if rows else 1)
    if len(rows) < 3:
        raise ParseError("truncated file", rows[-1][0])

    lineno, tok = rows[1]
    if len(tok) != 4 or tok[0] != "n" or tok[2] != "m":
        raise ParseError("expected 'n <vertex_count> m <edge_count>'", lineno)
    n, m = _ints([tok[1], tok[3]], lineno)
    if n < 1 or m < 0:
        raise ParseError("vertex count must be positive and edge count non-negative", lineno)

    lineno, tok = rows[2]
    if len(tok) != 2 or tok[0] != "c":
        raise ParseError("expected 'c <theta_const>'", lineno)
    (const,) = _floats(tok[1:], lineno)

    node = np.full((n, 2), np.nan)
    edges: list[tuple[int, int]] = []
    tables: list[list[float]] = []
    seen = set()
    for lineno, tok in rows[3:]:
        kind = tok[0]
        if kind == "v":
            if len(tok) != 4:
                raise ParseError("expected 'v <s> <theta_s0> <theta_s1>'", lineno)
            (s,) = _ints(tok[1:2], lineno)
            if not 0 <= s < n:
                raise ParseError(f"vertex {s} out of range for n={n}", lineno)
            if not np.isnan(node[s, 0]):
                raise ParseError(f"duplicate vertex line for {s}", lineno)
            node[s] = _floats(tok[2:], lineno)
        elif kind == "e":
            if len(tok) != 7:
                raise ParseError("expected 'e <s> <t> <t00> <t01> <t10> <t11>'", lineno)
            s, t = _ints(tok[1:3], lineno)
            if not (0 <= s < n and 0 <= t < n):
                raise ParseError(f"edge endpoint out of range for n={n}", lineno)
            if s >= t:
                raise ParseError("edge endpoints must satisfy s < t", lineno)
            if (s, t) in seen:
                raise ParseError(f"duplicate edge ({s}, {t})", lineno)
            seen.add((s, t))
            edges.append((s, t))
            tables.append(_floats(tok[3:], lineno))
        else:
            raise ParseError(f"unknown record type '{kind}'", lineno)

    if np.isnan(node).any():
        missing = int(np.flatnonzero(np.isnan(node[:, 0]))[0])
        raise ParseError(f"vertex count {n} inconsistent: no line for vertex {missing}", rows[-1][0])
    if len(edges) != m:
        raise ParseError(f"header declares {m} edges, found {len(edges)}", rows[-1][0])
    try:
        params = Parameters(const, node, np.asarray(tables, dtype=float).reshape(m, 2, 2))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return EnergyModel(Graph(n, tuple(edges)), params)
