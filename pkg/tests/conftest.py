import numpy as np
import pytest
from hypothesis import strategies as st

from holant.graph import Graph, complete_graph, path_graph
from holant.model import HolantInstance, build_b_matching
from holant.signatures import Signature


@pytest.fixture
def k3() -> HolantInstance:
    return build_b_matching(complete_graph(3), 1)


@pytest.fixture
def single_edge() -> HolantInstance:
    return build_b_matching(Graph(2, [(0, 1)]), 1)


@pytest.fixture
def path2() -> HolantInstance:
    """Two edges sharing the middle vertex."""
    return build_b_matching(path_graph(3), 1)


@st.composite
def log_concave_values(draw, max_d: int = 8, leading_zeros: bool = False) -> list[float]:
    """Consecutive-support log-concave sequence built from non-increasing log increments."""
    d = draw(st.integers(0, max_d))
    lo = draw(st.integers(0, d)) if leading_zeros else 0
    hi = draw(st.integers(lo, d))
    start = draw(st.floats(-2, 2))
    steps = sorted(draw(st.lists(st.floats(-3, 3), min_size=hi - lo, max_size=hi - lo)), reverse=True)
    logs = np.concatenate([[start], start + np.cumsum(steps)]) if steps else np.array([start])
    vals = [0.0] * lo + [float(np.exp(x)) for x in logs] + [0.0] * (d - hi)
    return vals


@st.composite
def small_instances(draw, max_vertices: int = 5, max_edges: int = 7) -> HolantInstance:
    n = draw(st.integers(2, max_vertices))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=min(max_edges, len(pairs)),
                           unique=True))
    g = Graph(n, chosen)
    sigs = []
    for v in range(n):
        vals = draw(log_concave_values(max_d=g.degree(v)))
        vals = (vals + [0.0] * (g.degree(v) + 1))[: g.degree(v) + 1]
        sigs.append(Signature(tuple(vals)))
    lams = draw(st.lists(st.sampled_from([0.5, 1.0, 2.0, 3.0]), min_size=g.m, max_size=g.m))
    return HolantInstance(g, tuple(sigs), tuple(lams))
