"""Conflict graphs, network configurations and topology generators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GraphFormatError(ValueError):
    """Raised when a graph document cannot be parsed."""


@dataclass(frozen=True)
class ConflictGraph:
    """Undirected interference graph over nodes ``0..n-1``.

    Edges are stored as a frozenset of ``(i, j)`` pairs with ``i < j`` so the
    graph is hashable and can key caches.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)
    names: tuple | None = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"node count must be a positive integer, got {self.n!r}")
        canon = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", frozenset(canon))
        if self.names is not None:
            names = tuple(str(s) for s in self.names)
            if len(names) != self.n:
                raise ValueError("names table length must equal n")
            if len(set(names)) != self.n:
                raise ValueError("node names must be unique")
            object.__setattr__(self, "names", names)

    @cached_property
    def adjacency(self) -> tuple[frozenset, ...]:
        nbrs = [set() for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        return tuple(frozenset(s) for s in nbrs)

    @cached_property
    def adjacency_matrix(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            A[i, j] = A[j, i] = True
        A.flags.writeable = False
        return A

    def neighbors(self, i: int) -> frozenset:
        return self.adjacency[i]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def is_complete(self) -> bool:
        return len(self.edges) == self.n * (self.n - 1) // 2

    def to_dict(self) -> dict:
        d = {"n": self.n, "edges": [list(e) for e in self.sorted_edges()]}
        if self.names is not None:
            d["names"] = list(self.names)
        return d

    def __repr__(self):
        return f"ConflictGraph(n={self.n}, edges={self.sorted_edges()})"


def serialize_graph(g: ConflictGraph) -> str:
    return json.dumps(g.to_dict())


def parse_graph(text: str) -> ConflictGraph:
    """Parse a graph document.

    Two formats are accepted: a JSON object ``{"n": int, "edges": [[i, j], ...],
    "names": [...]}`` and a plain edge list with an ``n=<int>`` header line
    followed by one ``i j`` pair per line (``#`` starts a comment). Duplicate
    and reversed edges are merged. When a names table is given, edge
    endpoints may be node names instead of integer ids.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"invalid JSON: {exc}") from exc
        return _graph_from_doc(doc)
    return _parse_edge_list(text)


def _graph_from_doc(doc) -> ConflictGraph:
    if not isinstance(doc, dict) or "n" not in doc:
        raise GraphFormatError("graph document must be an object with key 'n'")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise GraphFormatError(f"'n' must be a positive integer, got {n!r}")
    names = doc.get("names")
    lookup = {}
    if names is not None:
        if not isinstance(names, list) or len(names) != n:
            raise GraphFormatError("'names' must be a list of length n")
        lookup = {str(s): k for k, s in enumerate(names)}
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise GraphFormatError("'edges' must be a list")
    pairs = set()
    for e in edges:
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise GraphFormatError(f"edge must be a pair, got {e!r}")
        i, j = (_resolve_node(v, n, lookup) for v in e)
        if i == j:
            raise GraphFormatError(f"self-loop on node {i}")
        pairs.add((min(i, j), max(i, j)))
    return ConflictGraph(n, frozenset(pairs), tuple(names) if names is not None else None)


def _resolve_node(v, n, lookup) -> int:
    if isinstance(v, str) and v in lookup:
        return lookup[v]
    if isinstance(v, bool) or not isinstance(v, int):
        raise GraphFormatError(f"unknown node reference {v!r}")
    if not 0 <= v < n:
        raise GraphFormatError(f"node id {v} out of range for n={n}")
    return v


def _parse_edge_list(text: str) -> ConflictGraph:
    n = None
    pairs = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.replace(" ", "").startswith("n="):
            try:
                n = int(line.split("=", 1)[1])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad header {raw!r}") from None
            continue
        if n is None:
            raise GraphFormatError("edge list must start with an 'n=<int>' header")
        toks = line.split()
        if len(toks) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer node id") from None
        if i == j:
            raise GraphFormatError(f"line {lineno}: self-loop on node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"line {lineno}: node id out of range for n={n}")
        pairs.add((min(i, j), max(i, j)))
    if n is None or n < 1:
        raise GraphFormatError("missing or invalid 'n=<int>' header")
    return ConflictGraph(n, frozenset(pairs))


def load_graph(path) -> ConflictGraph:
    with open(path) as f:
        return parse_graph(f.read())


def gen_erdos_renyi(n: int, q: float, seed: int | None = None) -> ConflictGraph:
    """G(n, q) random graph.

    Uses ``numpy.random.default_rng(seed)`` (PCG64) and draws one uniform per
    unordered pair in lexicographic order ``(0,1), (0,2), ..., (n-2,n-1)``;
    the pair is an edge when the draw is below ``q``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= q <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < q
    return ConflictGraph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))


def gen_named(kind: str, n: int) -> ConflictGraph:
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind == "star":
        edges = [(0, k) for k in range(1, n)]
    elif kind == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif kind == "path":
        edges = [(k, k + 1) for k in range(n - 1)]
    elif kind == "cycle":
        edges = [(k, k + 1) for k in range(n - 1)]
        if n > 2:
            edges.append((0, n - 1))
    elif kind == "empty":
        edges = []
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return ConflictGraph(n, frozenset(edges))


@dataclass(frozen=True)
class NetworkConfig:
    """A conflict graph together with access probabilities and timing.

    ``T`` is the packet length in slots and ``sigma`` the idle slot
    duration. Only the renewal formulas use ``sigma``; the Markov engine
    works in units of idle slots.
    """

    graph: ConflictGraph
    p: tuple
    T: int = 2
    sigma: float = 1.0

    def __post_init__(self):
        p = tuple(float(x) for x in np.asarray(self.p, dtype=float).ravel())
        if len(p) != self.graph.n:
            raise ValueError(f"expected {self.graph.n} access probabilities, got {len(p)}")
        if any(not (0.0 <= x <= 1.0) for x in p):
            raise ValueError(f"access probabilities must lie in [0, 1]: {p}")
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be an integer >= 1, got {self.T!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def p_array(self) -> np.ndarray:
        return np.array(self.p)

    def with_p(self, p) -> "NetworkConfig":
        return NetworkConfig(self.graph, tuple(p), self.T, self.sigma)
