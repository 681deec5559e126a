import json

import numpy as np
import pytest

from dispersim import parse_graph_file


def random_connected_env(n, extra_edges, seed, sources=None):
    """Random connected graph on n vertices: a random attachment tree plus
    extra random edges."""
    rng = np.random.default_rng(seed)
    edges = set()
    for v in range(2, n + 1):
        edges.add((int(rng.integers(1, v)), v))
    for _ in range(extra_edges):
        u, v = sorted(int(x) for x in rng.integers(1, n + 1, size=2))
        if u != v:
            edges.add((u, v))
    if sources is None:
        sources = [int(rng.integers(1, n + 1))]
    spec = {"n": n, "edges": [list(e) for e in edges], "sources": sources}
    return parse_graph_file(json.dumps(spec))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
