"""Sampling and exact verification for binary symmetric Holant problems
with log-concave signatures (b-matchings, b-edge covers and relatives)."""

from .graph import Graph, Pinning, gen_graph, incident_edges, remove_edges
from .model import HolantInstance, build_b_edge_cover, build_b_matching, induced, weight
from .signatures import Signature, compute_params, gen_poly_eval, shift_down, validate

__all__ = [
    "Graph",
    "HolantInstance",
    "Pinning",
    "Signature",
    "build_b_edge_cover",
    "build_b_matching",
    "compute_params",
    "gen_graph",
    "gen_poly_eval",
    "incident_edges",
    "induced",
    "remove_edges",
    "shift_down",
    "validate",
    "weight",
]

__version__ = "0.1.0"
