"""Holant instances: assembly, weights, pinning reduction, and builders."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .graph import Graph, Pinning, config_to_mask, gen_graph, read_edge_list, remove_edges
from .signatures import Signature, b_matching_signature, shift_down, validate

LOG_DOMAIN_EDGES = 30


class InfeasiblePinning(ValueError):
    pass


@dataclass(frozen=True)
class HolantInstance:
    """Graph with a signature per vertex and a weight per edge.

    ``sigs[v]`` must cover ``f_v(0..deg v)``; longer signatures are allowed
    and keep the values a downward shift needs later. ``strict`` enforces
    ``f_v(0) > 0`` at every vertex; counterexample instances switch it off.
    """

    graph: Graph
    sigs: tuple[Signature, ...]
    lambdas: tuple[float, ...]
    strict: bool = True

    def __post_init__(self):
        g = self.graph
        sigs = tuple(s if isinstance(s, Signature) else validate(s) for s in self.sigs)
        object.__setattr__(self, "sigs", sigs)
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if len(sigs) != g.n:
            raise ValueError(f"need {g.n} signatures, got {len(sigs)}")
        if len(self.lambdas) != g.m:
            raise ValueError(f"need {g.m} edge weights, got {len(self.lambdas)}")
        for v, f in enumerate(sigs):
            validate(f.values)
            if len(f) < g.degrees[v] + 1:
                raise ValueError(
                    f"signature at vertex {v} has {len(f)} values but degree is {g.degrees[v]}")
            if self.strict and f.values[0] <= 0:
                raise ValueError(f"vertex {v} has f(0) = 0")
        for e, lam in enumerate(self.lambdas):
            if not (lam > 0 and math.isfinite(lam)):
                raise ValueError(f"edge {e} weight must be positive and finite, got {lam}")

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def sig_table(self) -> np.ndarray:
        """``(n, Delta + 2)`` array of ``f_v(k)`` for ``k <= deg v``, zero elsewhere."""
        width = self.graph.max_degree + 2
        table = np.zeros((self.n, width))
        for v, f in enumerate(self.sigs):
            d = self.graph.degrees[v]
            table[v, : d + 1] = f.values[: d + 1]
        return table

    def with_sig(self, v: int, f: Signature) -> "HolantInstance":
        sigs = list(self.sigs)
        sigs[v] = f
        return HolantInstance(self.graph, tuple(sigs), self.lambdas, self.strict)


def weight(inst: HolantInstance, cfg: Sequence[int] | np.ndarray | int) -> float:
    """Unnormalized Gibbs weight of an edge configuration.

    ``cfg`` is a 0/1 vector over edge ids or a bit mask. Products run in log
    space once the graph has more than 30 edges.
    """
    g = inst.graph
    if isinstance(cfg, (int, np.integer)):
        mask = int(cfg)
    else:
        arr = np.asarray(cfg)
        if arr.shape != (g.m,):
            raise ValueError(f"configuration length {arr.shape} does not match {g.m} edges")
        mask = config_to_mask(arr)
    occ = [0] * g.n
    occupied = [e for e in range(g.m) if (mask >> e) & 1]
    for e in occupied:
        u, v = g.edges[e]
        occ[u] += 1
        occ[v] += 1
    factors = [inst.sigs[v].at(occ[v]) for v in range(g.n)]
    factors += [inst.lambdas[e] for e in occupied]
    if g.m > LOG_DOMAIN_EDGES:
        if any(x == 0 for x in factors):
            return 0.0
        return math.exp(math.fsum(math.log(x) for x in factors))
    out = 1.0
    for x in factors:
        out *= x
    return out


def shift_vertex(inst: HolantInstance, v: int) -> HolantInstance:
    """Replace ``f_v`` with ``D f_v`` on the same graph.

    A signature holding only ``f_v(0..deg v)`` is extended by ``f_v(deg v + 1) = 0``
    before shifting, which keeps it log-concave.
    """
    f = inst.sigs[v]
    deg = inst.graph.degrees[v]
    if f.d < deg + 1:
        f = f.truncated(deg + 1)
    return inst.with_sig(v, shift_down(f, 1))


def induced(inst: HolantInstance, pin: Pinning) -> tuple[HolantInstance, dict[int, int]]:
    """Instance on ``G minus domain(pin)`` whose Gibbs law is the conditional law.

    Each vertex loses one leading signature value per occupied pinned edge.
    Returns the instance and the ``old -> new`` edge-id map. Raises
    InfeasiblePinning when a shifted signature is identically zero.
    """
    g = inst.graph
    pin.check(g)
    if not len(pin):
        return inst, {e: e for e in range(g.m)}
    occ = [0] * g.n
    for e in pin.occupied():
        u, v = g.edges[e]
        occ[u] += 1
        occ[v] += 1
    sigs = []
    for v, f in enumerate(inst.sigs):
        if occ[v] > f.d:
            raise InfeasiblePinning(f"vertex {v} has {occ[v]} pinned occupied edges")
        shifted = shift_down(f, occ[v])
        if shifted.support_top < 0:
            raise InfeasiblePinning(f"vertex {v} has an all-zero shifted signature")
        sigs.append(shifted)
    sub, mapping = remove_edges(g, pin.domain)
    lambdas = [0.0] * sub.m
    for old, new in mapping.items():
        lambdas[new] = inst.lambdas[old]
    return HolantInstance(sub, tuple(sigs), tuple(lambdas), inst.strict), mapping


def _per_vertex(value: Any, n: int, name: str) -> list:
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) != n:
            raise ValueError(f"{name} needs {n} entries, got {len(value)}")
        return list(value)
    return [value] * n


def build_b_matching(g: Graph, b: int | Sequence[int], lam: float | Sequence[float] = 1.0) -> HolantInstance:
    """Generalized b-matchings: ``f_v(k) = 1{k <= b_v}``, clamped to the degree."""
    bs = _per_vertex(b, g.n, "b")
    lams = _per_vertex(lam, g.m, "lambda")
    sigs = tuple(b_matching_signature(int(bs[v]), g.degrees[v]) for v in range(g.n))
    return HolantInstance(g, sigs, tuple(lams))


def build_b_edge_cover(g: Graph, b: int, lam: float | Sequence[float] = 1.0) -> tuple[HolantInstance, bool]:
    """Complement instance for b-edge covers.

    Returns b-matchings with thresholds ``deg v - b`` and weights ``1/lambda``,
    plus the flag ``True``: each sample ``S'`` maps to the cover ``E minus S'``.
    """
    if b < 0:
        raise ValueError("b must be non-negative")
    min_deg = min(g.degrees, default=0)
    if b > min_deg:
        raise ValueError(f"no {b}-edge cover exists: minimum degree is {min_deg}")
    lams = _per_vertex(lam, g.m, "lambda")
    thresholds = [g.degrees[v] - b for v in range(g.n)]
    return build_b_matching(g, thresholds, [1.0 / x for x in lams]), True


def complement(cfg: np.ndarray) -> np.ndarray:
    return (1 - np.asarray(cfg, dtype=np.uint8)).astype(np.uint8)


# --- config files -------------------------------------------------------------

@dataclass(frozen=True)
class LoadedInstance:
    instance: HolantInstance
    complemented: bool
    # original per-edge weights; for edge covers these are the cover weights
    lambdas: tuple[float, ...]


def signature_from_spec(spec: Any, degree: int) -> Signature:
    """Signature for one vertex from a JSON value.

    Arrays are truncated or zero-padded to ``degree + 1`` values. Objects
    ``{"b_matching": b}`` and ``{"b_edge_cover": b}`` build the indicator of
    ``k <= b`` and ``k >= b``.
    """
    if isinstance(spec, dict):
        if "b_matching" in spec:
            return b_matching_signature(int(spec["b_matching"]), degree)
        if "b_edge_cover" in spec:
            b = int(spec["b_edge_cover"])
            return Signature(tuple(1.0 if k >= b else 0.0 for k in range(degree + 1)))
        raise ValueError(f"unknown signature builder {spec!r}")
    vals = [float(x) for x in spec]
    vals = vals[: degree + 1] + [0.0] * max(0, degree + 1 - len(vals))
    return validate(vals)


def assign_signatures(g: Graph, mapping: dict[str, Any]) -> list[Signature]:
    """Resolve vertex selectors: ``all``, then ``degree:k``, then id lists.

    An id-list key is a comma-separated string of vertex ids such as ``"0,3"``.
    Later (more specific) selectors override earlier ones.
    """
    chosen: list[Any] = [None] * g.n
    ranked = sorted(mapping.items(), key=lambda kv: 0 if kv[0] == "all" else 1 if kv[0].startswith("degree:") else 2)
    for key, spec in ranked:
        if key == "all":
            targets = range(g.n)
        elif key.startswith("degree:"):
            k = int(key.split(":", 1)[1])
            targets = [v for v in range(g.n) if g.degrees[v] == k]
        else:
            targets = [int(x) for x in key.split(",") if x.strip()]
        for v in targets:
            if not 0 <= v < g.n:
                raise ValueError(f"selector {key!r} names vertex {v} outside the graph")
            chosen[v] = spec
    missing = [v for v in range(g.n) if chosen[v] is None]
    if missing:
        raise ValueError(f"no signature given for vertices {missing}")
    return [signature_from_spec(chosen[v], g.degrees[v]) for v in range(g.n)]


def load_config(path: str | Path) -> LoadedInstance:
    """Read an instance config (JSON).

    Fields: ``graph`` (edge-list path relative to the config, or
    ``{"generator": spec, "seed": s}``), ``model`` (``b_matching``,
    ``b_edge_cover`` or ``custom``), ``b``, ``lambda``, ``signatures`` and
    optionally ``strict``.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    return instance_from_dict(doc, base=path.parent)


def instance_from_dict(doc: dict, base: Path | None = None) -> LoadedInstance:
    gspec = doc.get("graph")
    if gspec is None:
        raise ValueError("config needs a 'graph' field")
    if isinstance(gspec, dict):
        g = gen_graph(gspec["generator"], int(gspec.get("seed", 0)))
        file_lams = [1.0] * g.m
    else:
        gpath = Path(gspec)
        if base is not None and not gpath.is_absolute():
            gpath = base / gpath
        g, file_lams = read_edge_list(gpath)
    lam = doc.get("lambda", file_lams)
    lams = _per_vertex(lam, g.m, "lambda")
    model = doc.get("model", "b_matching")
    if model == "b_matching":
        inst = build_b_matching(g, doc.get("b", 1), lams)
        return LoadedInstance(inst, False, tuple(lams))
    if model == "b_edge_cover":
        inst, flag = build_b_edge_cover(g, int(doc.get("b", 1)), lams)
        return LoadedInstance(inst, flag, tuple(lams))
    if model == "custom":
        sigs = assign_signatures(g, doc.get("signatures", {}))
        inst = HolantInstance(g, tuple(sigs), tuple(lams), bool(doc.get("strict", True)))
        return LoadedInstance(inst, False, tuple(lams))
    raise ValueError(f"unknown model {model!r}")
