"""Graph environments the simulation runs on.

Finite environments (parsed grid maps, explicit graphs, path graphs) carry an
explicit CSR adjacency over vertices 1..n.  The three lazily-infinite path
variants used for replay expose the same query surface but compute adjacency
from the vertex index alone, so materialization order cannot matter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import (
    DisconnectedError,
    EdgeOutOfRangeError,
    NoSourceError,
    UnknownCharacterError,
)

VertexId = int

FINITE_GENERAL = "finite-general"
FINITE_PATH = "finite-path"
INFINITE_PLAIN = "infinite-path-plain"
INFINITE_PREFILLED = "infinite-path-prefilled"
TASEP_B = "tasep-b"

_INFINITE_VARIANTS = (INFINITE_PLAIN, INFINITE_PREFILLED, TASEP_B)


@dataclass(frozen=True)
class EnvironmentGraph:
    """Immutable environment description.

    Finite variants hold ``n`` vertices numbered 1..n with CSR adjacency
    (``adj_indptr[v]:adj_indptr[v+1]`` slices ``adj_indices``, neighbor lists
    sorted ascending).  Infinite variants have ``n is None`` and adjacency
    v-1 / v+1 by index; ``tasep-b`` spans all integers, the other two start
    at vertex 1.
    """

    variant: str
    n: int | None
    adj_indptr: np.ndarray | None
    adj_indices: np.ndarray | None
    sources: tuple[VertexId, ...]
    grid_shape: tuple[int, int] | None = None
    label: str = ""

    # -- queries -----------------------------------------------------------

    def is_finite(self) -> bool:
        return self.variant not in _INFINITE_VARIANTS

    def has_vertex(self, v: VertexId) -> bool:
        if self.is_finite():
            return 1 <= v <= self.n
        if self.variant == TASEP_B:
            return True
        return v >= 1

    def neighbors(self, v: VertexId) -> list[VertexId]:
        if not self.has_vertex(v):
            raise KeyError(f"vertex {v} not in environment")
        if self.is_finite():
            lo, hi = self.adj_indptr[v], self.adj_indptr[v + 1]
            return [int(u) for u in self.adj_indices[lo:hi]]
        if self.variant == TASEP_B:
            return [v - 1, v + 1]
        return [v + 1] if v == 1 else [v - 1, v + 1]

    def initial_settled_dummy(self, v: VertexId) -> bool:
        """Whether vertex v starts with an immortal settled dummy robot."""
        return self.variant in (INFINITE_PREFILLED, TASEP_B) and self.has_vertex(v)

    def dummy_mark_target(self, v: VertexId) -> VertexId:
        """The vertex marked by the settled dummy at v (its left neighbor)."""
        if not self.initial_settled_dummy(v):
            raise KeyError(f"no settled dummy at vertex {v}")
        return v - 1

    def initial_mobile_robot(self, v: VertexId) -> int | None:
        """Index i of the mobile robot A_i initially at v, if any."""
        if self.variant == TASEP_B and v <= 0:
            return 1 - v
        return None

    def degree(self, v: VertexId) -> int:
        return len(self.neighbors(v))

    def edge_count(self) -> int:
        if not self.is_finite():
            raise ValueError("infinite environment has no finite edge count")
        return int(len(self.adj_indices) // 2)


# -- construction ------------------------------------------------------------


def _build_csr(n: int, edges: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    neigh: list[list[int]] = [[] for _ in range(n + 1)]
    for u, v in edges:
        neigh[u].append(v)
        neigh[v].append(u)
    indptr = np.zeros(n + 2, dtype=np.int64)
    chunks = []
    for v in range(1, n + 1):
        ns = sorted(set(neigh[v]))
        chunks.append(ns)
        indptr[v + 1] = indptr[v] + len(ns)
    indptr[1] = 0  # vertex 0 unused
    for v in range(1, n + 1):
        indptr[v + 1] = indptr[v] + len(chunks[v - 1])
    indices = np.fromiter(
        (u for ns in chunks for u in ns), dtype=np.int64, count=int(indptr[n + 1])
    )
    return indptr, indices


def _check_connected(env: EnvironmentGraph) -> None:
    n = env.n
    if n == 0:
        raise DisconnectedError("environment has no vertices")
    seen = np.zeros(n + 1, dtype=bool)
    stack = [env.sources[0] if env.sources else 1]
    seen[stack[0]] = True
    count = 0
    while stack:
        v = stack.pop()
        count += 1
        lo, hi = env.adj_indptr[v], env.adj_indptr[v + 1]
        for u in env.adj_indices[lo:hi]:
            if not seen[u]:
                seen[u] = True
                stack.append(int(u))
    if count != n:
        raise DisconnectedError(f"only {count} of {n} vertices reachable")


def parse_grid_map(text: str, label: str = "") -> EnvironmentGraph:
    """Parse an ASCII grid map: '#' obstacle, '.' free, 'S' source.

    One vertex per non-'#' cell, numbered row-major; 4-connectivity edges;
    sources in row-major order.  Raises on unknown characters, missing
    sources, or disconnected free space.
    """
    if not text.strip():
        raise UnknownCharacterError("empty map")
    rows = [r for r in text.splitlines() if r != ""]
    height = len(rows)
    width = max(len(r) for r in rows)
    cell_id = {}
    sources = []
    next_id = 1
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                continue
            if ch not in (".", "S"):
                raise UnknownCharacterError(f"unexpected character {ch!r} at row {y}")
            cell_id[(y, x)] = next_id
            if ch == "S":
                sources.append(next_id)
            next_id += 1
    if not sources:
        raise NoSourceError("map contains no 'S' cell")
    n = next_id - 1
    edges = []
    for (y, x), v in cell_id.items():
        for dy, dx in ((0, 1), (1, 0)):
            u = cell_id.get((y + dy, x + dx))
            if u is not None:
                edges.append((v, u))
    indptr, indices = _build_csr(n, edges)
    env = EnvironmentGraph(
        variant=FINITE_GENERAL,
        n=n,
        adj_indptr=indptr,
        adj_indices=indices,
        sources=tuple(sources),
        grid_shape=(height, width),
        label=label or f"grid{height}x{width}",
    )
    _check_connected(env)
    return env


def parse_graph_file(text: str, label: str = "") -> EnvironmentGraph:
    """Parse a JSON graph: {"n": int, "edges": [[u,v],...], "sources": [s,...]}.

    Edges are undirected, vertices 1-based.  Source order is preserved (it
    fixes the multi-source entrance streams).
    """
    data = json.loads(text)
    n = int(data["n"])
    raw_edges = data.get("edges", [])
    sources = [int(s) for s in data.get("sources", [])]
    if not sources:
        raise NoSourceError("graph file declares no sources")
    edges = []
    for e in raw_edges:
        u, v = int(e[0]), int(e[1])
        if not (1 <= u <= n and 1 <= v <= n):
            raise EdgeOutOfRangeError(f"edge ({u},{v}) outside 1..{n}")
        edges.append((u, v))
    for s in sources:
        if not (1 <= s <= n):
            raise EdgeOutOfRangeError(f"source {s} outside 1..{n}")
    indptr, indices = _build_csr(n, edges)
    env = EnvironmentGraph(
        variant=FINITE_GENERAL,
        n=n,
        adj_indptr=indptr,
        adj_indices=indices,
        sources=tuple(sources),
        label=label or f"graph-n{n}",
    )
    _check_connected(env)
    return env


def path_graph(n: int) -> EnvironmentGraph:
    """Path v_1 - v_2 - ... - v_n with the source at v_1."""
    if n < 1:
        raise ValueError("path graph needs n >= 1")
    edges = [(i, i + 1) for i in range(1, n)]
    indptr, indices = _build_csr(n, edges)
    return EnvironmentGraph(
        variant=FINITE_PATH,
        n=n,
        adj_indptr=indptr,
        adj_indices=indices,
        sources=(1,),
        label=f"path-{n}",
    )


def infinite_path(variant: str) -> EnvironmentGraph:
    """One of the lazily-infinite path variants: plain, prefilled, tasep-b."""
    names = {
        "plain": INFINITE_PLAIN,
        "prefilled": INFINITE_PREFILLED,
        "tasep-b": TASEP_B,
        INFINITE_PLAIN: INFINITE_PLAIN,
        INFINITE_PREFILLED: INFINITE_PREFILLED,
        TASEP_B: TASEP_B,
    }
    if variant not in names:
        raise ValueError(f"unknown infinite path variant {variant!r}")
    var = names[variant]
    sources = () if var == TASEP_B else (1,)
    return EnvironmentGraph(
        variant=var,
        n=None,
        adj_indptr=None,
        adj_indices=None,
        sources=sources,
        label=var,
    )


def grid_environment(width: int, height: int, source: str = "center") -> EnvironmentGraph:
    """Obstacle-free width x height grid with a single source cell."""
    rows = [["."] * width for _ in range(height)]
    if source == "center":
        rows[height // 2][width // 2] = "S"
    else:
        rows[0][0] = "S"
    text = "\n".join("".join(r) for r in rows)
    return parse_grid_map(text, label=f"grid-{width}x{height}")


BUNDLED_MAPS = ("fig1", "indoor")


def load_bundled_map(name: str) -> EnvironmentGraph:
    """Load one of the bundled reconstruction maps.

    These approximate map layouts that were published only as figures, so
    they carry loose, directional acceptance checks rather than strict ones.
    """
    if name not in BUNDLED_MAPS:
        raise ValueError(f"unknown bundled map {name!r}; have {BUNDLED_MAPS}")
    text = (
        resources.files("dispersim")
        .joinpath(f"maps/{name}_reconstruction.map")
        .read_text()
    )
    return parse_grid_map(text, label=f"bundled:{name}")


def load_env_spec(spec: str) -> EnvironmentGraph:
    """Resolve a CLI environment spec.

    Accepted forms: ``path:N``, ``grid:WxH``, ``bundled:NAME``, or a file
    path (``.json`` graph file, anything else an ASCII grid map).
    """
    if spec.startswith("path:"):
        return path_graph(int(spec.split(":", 1)[1]))
    if spec.startswith("grid:"):
        w, h = spec.split(":", 1)[1].lower().split("x")
        return grid_environment(int(w), int(h))
    if spec.startswith("bundled:"):
        return load_bundled_map(spec.split(":", 1)[1])
    with open(spec, "r", encoding="utf-8") as fh:
        text = fh.read()
    if spec.endswith(".json"):
        return parse_graph_file(text, label=spec)
    return parse_grid_map(text, label=spec)
