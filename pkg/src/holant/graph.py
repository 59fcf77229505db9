"""Simple undirected graphs with stable edge ids, pinnings, and generators."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rng import stream


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``.

    Edge ``i`` is ``edges[i]``, stored as ``(u, v)`` with ``u < v``. Edge ids
    give the total order used for every tie-break in the package.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        normalized = []
        seen = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) has a vertex outside 0..{self.n - 1}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            pair = (min(u, v), max(u, v))
            if pair in seen:
                raise ValueError(f"duplicate edge {pair}")
            seen.add(pair)
            normalized.append(pair)
        object.__setattr__(self, "edges", tuple(normalized))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for e, (u, v) in enumerate(self.edges):
            inc[u].append(e)
            inc[v].append(e)
        return tuple(tuple(lst) for lst in inc)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(lst) for lst in self.incidence)

    @property
    def max_degree(self) -> int:
        return max(self.degrees, default=0)

    def degree(self, v: int) -> int:
        return len(incident_edges(self, v))

    def other_end(self, e: int, v: int) -> int:
        u, w = self.edges[e]
        if v == u:
            return w
        if v == w:
            return u
        raise ValueError(f"vertex {v} is not an endpoint of edge {e}")

    @cached_property
    def incidence_matrix(self) -> np.ndarray:
        """``(m, n)`` 0/1 matrix with a 1 where edge meets vertex."""
        mat = np.zeros((self.m, self.n), dtype=np.int64)
        for e, (u, v) in enumerate(self.edges):
            mat[e, u] = 1
            mat[e, v] = 1
        return mat


def incident_edges(g: Graph, v: int) -> tuple[int, ...]:
    """Edge ids incident to ``v`` in ascending order."""
    if not 0 <= v < g.n:
        raise IndexError(f"vertex {v} out of range for graph with {g.n} vertices")
    return g.incidence[v]


def remove_edges(g: Graph, drop: Iterable[int]) -> tuple[Graph, dict[int, int]]:
    """Delete edges, keeping the vertex set.

    Surviving edges are renumbered densely in their original order. Returns
    the new graph and the ``old id -> new id`` map for the survivors.
    """
    drop = set(int(e) for e in drop)
    unknown = [e for e in drop if not 0 <= e < g.m]
    if unknown:
        raise KeyError(f"unknown edge ids {sorted(unknown)}")
    mapping: dict[int, int] = {}
    kept = []
    for e, pair in enumerate(g.edges):
        if e not in drop:
            mapping[e] = len(kept)
            kept.append(pair)
    return Graph(g.n, tuple(kept)), mapping


@dataclass(frozen=True)
class Pinning:
    """Partial edge assignment ``tau`` on the domain ``values.keys()``."""

    values: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for e, val in dict(self.values).items():
            if val not in (0, 1):
                raise ValueError(f"pinned value for edge {e} must be 0 or 1, got {val!r}")
            clean[int(e)] = int(val)
        object.__setattr__(self, "values", dict(sorted(clean.items())))

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.values)

    @property
    def mask(self) -> int:
        out = 0
        for e in self.values:
            out |= 1 << e
        return out

    @property
    def bits(self) -> int:
        out = 0
        for e, val in self.values.items():
            if val:
                out |= 1 << e
        return out

    def occupied(self) -> list[int]:
        return [e for e, val in self.values.items() if val]

    def extend(self, e: int, val: int) -> "Pinning":
        if e in self.values:
            raise ValueError(f"edge {e} already pinned")
        return Pinning({**self.values, e: val})

    def check(self, g: Graph) -> None:
        bad = [e for e in self.values if not 0 <= e < g.m]
        if bad:
            raise KeyError(f"pinning refers to unknown edges {bad}")

    def __len__(self):
        return len(self.values)


# --- configurations -------------------------------------------------------

def config_to_mask(cfg: Sequence[int] | np.ndarray) -> int:
    """Pack a 0/1 edge vector into an int with bit ``e`` for edge ``e``."""
    out = 0
    for e, bit in enumerate(np.asarray(cfg).tolist()):
        if bit:
            out |= 1 << e
    return out


def mask_to_config(mask: int, m: int) -> np.ndarray:
    return np.array([(mask >> e) & 1 for e in range(m)], dtype=np.uint8)


def occupied_edges(cfg: np.ndarray) -> list[int]:
    return np.flatnonzero(np.asarray(cfg)).tolist()


# --- generators -------------------------------------------------------------

_NAMED = re.compile(r"^(path|cycle|complete|star)_(\d+)$")
_FAMILY = re.compile(r"^(path_mixed_signatures|path_with_pendants)_(\d+)$")


def path_graph(k: int) -> Graph:
    return Graph(k, tuple((i, i + 1) for i in range(k - 1)))


def cycle_graph(k: int) -> Graph:
    if k < 3:
        raise ValueError("a simple cycle needs at least 3 vertices")
    return Graph(k, tuple((i, (i + 1) % k) for i in range(k)))


def complete_graph(k: int) -> Graph:
    return Graph(k, tuple(itertools.combinations(range(k), 2)))


def star_graph(k: int) -> Graph:
    """Star on ``k`` vertices: centre 0 joined to ``1..k-1``."""
    return Graph(k, tuple((0, i) for i in range(1, k)))


def pendant_path_graph(n: int) -> Graph:
    """Path ``v0..vn`` plus a pendant ``u_i v_i`` for ``1 <= i < n``.

    Vertices ``0..n`` are the path; ``u_i`` is vertex ``n + i``. Path edges
    come first (edge ``i`` is ``v_i v_{i+1}``), then pendants in order of i.
    """
    path = [(i, i + 1) for i in range(n)]
    pendants = [(i, n + i) for i in range(1, n)]
    return Graph(2 * n, tuple(path + pendants))


def random_graph(n: int, delta: int, seed: int, m: int | None = None) -> Graph:
    """Random graph with maximum degree ``delta``.

    Edges are added one at a time, each drawn uniformly from the pairs whose
    endpoints both still have spare degree. Stops at ``m`` edges, or when no
    pair can be added if ``m`` is None. A run that saturates before reaching
    ``m`` restarts on the same stream, so the result stays a function of the
    seed.
    """
    if delta < 1:
        raise ValueError("delta must be at least 1")
    if n < 0:
        raise ValueError("n must be non-negative")
    if m is not None and m > n * delta // 2:
        raise ValueError(f"cannot place {m} edges on {n} vertices with max degree {delta}")
    rng = stream(seed, 0)
    for _ in range(1000):
        deg = np.zeros(n, dtype=np.int64)
        present: set[tuple[int, int]] = set()
        edges: list[tuple[int, int]] = []
        while m is None or len(edges) < m:
            free = np.flatnonzero(deg < delta)
            cand = [(int(u), int(v)) for u, v in itertools.combinations(free, 2)
                    if (int(u), int(v)) not in present]
            if not cand:
                break
            u, v = cand[int(rng.integers(len(cand)))]
            present.add((u, v))
            edges.append((u, v))
            deg[u] += 1
            deg[v] += 1
        if m is None or len(edges) == m:
            return Graph(n, tuple(edges))
    raise ValueError(f"could not place {m} edges on {n} vertices with max degree {delta}")


def gen_graph(spec: str, seed: int = 0) -> Graph:
    """Build a graph from a generator spec string.

    Accepted forms: ``path_k``, ``cycle_k``, ``complete_k``, ``star_k`` (k
    vertices each), ``random:n=20,delta=3[,m=14]``, and the counterexample
    graphs ``path_mixed_signatures_n`` / ``path_with_pendants_n`` (path with
    n edges, the latter with pendants).
    """
    spec = spec.strip()
    match = _NAMED.match(spec)
    if match:
        kind, k = match.group(1), int(match.group(2))
        return {"path": path_graph, "cycle": cycle_graph,
                "complete": complete_graph, "star": star_graph}[kind](k)
    match = _FAMILY.match(spec)
    if match:
        n = int(match.group(2))
        if n < 1:
            raise ValueError("counterexample paths need n >= 1")
        if match.group(1) == "path_mixed_signatures":
            return path_graph(n + 1)
        return pendant_path_graph(n)
    if spec.startswith("random:"):
        params = {}
        for part in spec[len("random:"):].split(","):
            key, _, val = part.partition("=")
            params[key.strip()] = int(val)
        try:
            n, delta = params.pop("n"), params.pop("delta")
        except KeyError as exc:
            raise ValueError(f"random spec needs n and delta: {spec!r}") from exc
        m = params.pop("m", None)
        if params:
            raise ValueError(f"unknown random spec keys {sorted(params)}")
        return random_graph(n, delta, seed, m)
    raise ValueError(f"unknown graph spec {spec!r}")


def connected_graphs(max_vertices: int, min_vertices: int = 2) -> list[Graph]:
    """All connected graphs on ``min_vertices..max_vertices`` vertices up to isomorphism."""
    import networkx as nx

    if max_vertices > 7:
        raise ValueError("the graph atlas only covers graphs with up to 7 vertices")
    out = []
    for atlas_graph in nx.graph_atlas_g():
        k = atlas_graph.number_of_nodes()
        if k < min_vertices or k > max_vertices or not nx.is_connected(atlas_graph):
            continue
        out.append(Graph(k, tuple(sorted(tuple(sorted(e)) for e in atlas_graph.edges()))))
    return out


# --- text format -------------------------------------------------------------

def parse_edge_list(text: str) -> tuple[Graph, list[float]]:
    """Parse ``n m`` followed by ``m`` lines of ``u v [lambda]``.

    ``#`` starts a comment. Returns the graph and per-edge weights.
    """
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise ValueError("empty edge list")
    header = rows[0]
    if len(header) != 2:
        raise ValueError("first line must be 'n m'")
    n, m = int(header[0]), int(header[1])
    body = rows[1:]
    if len(body) != m:
        raise ValueError(f"header declares {m} edges but {len(body)} edge lines follow")
    edges, lambdas = [], []
    for row in body:
        if len(row) not in (2, 3):
            raise ValueError(f"malformed edge line {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1])))
        lambdas.append(float(row[2]) if len(row) == 3 else 1.0)
    return Graph(n, tuple(edges)), lambdas


def read_edge_list(path: str | Path) -> tuple[Graph, list[float]]:
    return parse_edge_list(Path(path).read_text())


def format_edge_list(g: Graph, lambdas: Sequence[float] | None = None) -> str:
    lines = [f"{g.n} {g.m}"]
    for e, (u, v) in enumerate(g.edges):
        if lambdas is None:
            lines.append(f"{u} {v}")
        else:
            lines.append(f"{u} {v} {lambdas[e]!r}")
    return "\n".join(lines) + "\n"
