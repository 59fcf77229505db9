"""Heat-bath Glauber dynamics over edge configurations.

Each step picks a uniform edge ``e = {u, v}`` and resamples it from its
conditional law. With ``c_u, c_v`` the occupancies at the endpoints not
counting ``e``::

    p = lam_e f_u(c_u+1) f_v(c_v+1) / (f_u(c_u) f_v(c_v) + lam_e f_u(c_u+1) f_v(c_v+1))

so a step costs O(1) given per-vertex occupancy counters.

Chain ``i`` of a batch with master seed ``s`` draws from ``rng.stream(s, i)``;
``run`` is chain 0. A stream is consumed in blocks of ``BLOCK`` steps: first
the block's edge indices (``integers(0, m)``), then its uniforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .model import HolantInstance, weight
from .rng import stream

BLOCK = 1 << 16


class InfeasibleStart(ValueError):
    pass


def heat_bath_probability(inst: HolantInstance, occupancy: np.ndarray, cfg: np.ndarray, e: int) -> float:
    u, v = inst.graph.edges[e]
    own = int(cfg[e])
    cu, cv = int(occupancy[u]) - own, int(occupancy[v]) - own
    fu, fv = inst.sigs[u], inst.sigs[v]
    on = inst.lambdas[e] * fu.at(cu + 1) * fv.at(cv + 1)
    off = fu.at(cu) * fv.at(cv)
    return on / (off + on)


@dataclass
class ChainState:
    cfg: np.ndarray
    occupancy: np.ndarray
    rng: np.random.Generator
    step: int = 0

    @classmethod
    def start(cls, inst: HolantInstance, seed: int, start: np.ndarray | str = "empty") -> "ChainState":
        cfg = initial_config(inst, start)
        return cls(cfg, occupancy_of(inst, cfg), stream(seed, 0))

    def recount_ok(self, inst: HolantInstance) -> bool:
        return bool(np.array_equal(self.occupancy, occupancy_of(inst, self.cfg)))


def occupancy_of(inst: HolantInstance, cfg: np.ndarray) -> np.ndarray:
    return (np.asarray(cfg, dtype=np.int64) @ inst.graph.incidence_matrix).astype(np.int64)


def greedy_config(inst: HolantInstance) -> np.ndarray:
    """Add edges in id order whenever the weight stays positive."""
    cfg = np.zeros(inst.m, dtype=np.uint8)
    for e in range(inst.m):
        cfg[e] = 1
        if weight(inst, cfg) <= 0:
            cfg[e] = 0
    return cfg


def initial_config(inst: HolantInstance, start: np.ndarray | Sequence[int] | str) -> np.ndarray:
    if isinstance(start, str):
        if start == "empty":
            cfg = np.zeros(inst.m, dtype=np.uint8)
        elif start == "greedy":
            cfg = greedy_config(inst)
        else:
            raise ValueError(f"unknown start {start!r}")
    else:
        cfg = np.asarray(start, dtype=np.uint8).copy()
        if cfg.shape != (inst.m,):
            raise ValueError(f"start has shape {cfg.shape}, expected ({inst.m},)")
    if weight(inst, cfg) <= 0:
        raise InfeasibleStart("start configuration has zero weight")
    return cfg


def step(state: ChainState, inst: HolantInstance) -> ChainState:
    """One heat-bath update in place (reference implementation)."""
    if inst.m == 0:
        state.step += 1
        return state
    e = int(state.rng.integers(inst.m))
    p = heat_bath_probability(inst, state.occupancy, state.cfg, e)
    new = 1 if state.rng.random() < p else 0
    old = int(state.cfg[e])
    if new != old:
        u, v = inst.graph.edges[e]
        state.cfg[e] = new
        state.occupancy[u] += new - old
        state.occupancy[v] += new - old
    state.step += 1
    return state


@njit(cache=True)
def _advance(eu, ev, table, lam, cfg, occ, picks, us):
    for i in range(picks.shape[0]):
        e = picks[i]
        u = eu[e]
        v = ev[e]
        own = cfg[e]
        cu = occ[u] - own
        cv = occ[v] - own
        on = lam[e] * table[u, cu + 1] * table[v, cv + 1]
        off = table[u, cu] * table[v, cv]
        new = 1 if us[i] * (off + on) < on else 0
        if new != own:
            cfg[e] = new
            occ[u] += new - own
            occ[v] += new - own


@njit(cache=True)
def _advance_many(eu, ev, table, lam, cfgs, occs, picks, us):
    for c in range(cfgs.shape[0]):
        _advance(eu, ev, table, lam, cfgs[c], occs[c], picks[c], us[c])


def _kernel_args(inst: HolantInstance):
    g = inst.graph
    eu = np.array([u for u, _ in g.edges], dtype=np.int64)
    ev = np.array([v for _, v in g.edges], dtype=np.int64)
    return eu, ev, inst.sig_table, np.asarray(inst.lambdas, dtype=np.float64)


def _draw_block(rng: np.random.Generator, m: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    return rng.integers(0, m, size=k), rng.random(k)


def _draws(rng: np.random.Generator, m: int, steps: int):
    done = 0
    while done < steps:
        k = min(BLOCK, steps - done)
        yield _draw_block(rng, m, k)
        done += k


def advance(inst: HolantInstance, cfg: np.ndarray, occ: np.ndarray, rng: np.random.Generator, steps: int) -> None:
    """Run ``steps`` updates in place, drawing from ``rng``."""
    if inst.m == 0 or steps <= 0:
        return
    eu, ev, table, lam = _kernel_args(inst)
    for picks, us in _draws(rng, inst.m, steps):
        _advance(eu, ev, table, lam, cfg, occ, picks, us)


def run(inst: HolantInstance, steps: int, seed: int, start: np.ndarray | str = "empty") -> np.ndarray:
    """Final configuration of one chain; a pure function of its arguments."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    cfg = initial_config(inst, start)
    occ = occupancy_of(inst, cfg)
    advance(inst, cfg, occ, stream(seed, 0), steps)
    return cfg


def sample_batch(inst: HolantInstance, count: int, steps: int, seed: int,
                 start: np.ndarray | str = "empty", first_index: int = 0) -> np.ndarray:
    """``(count, m)`` array of final states of independent chains.

    Row ``i`` is chain ``first_index + i`` of master ``seed``; row 0 of a
    batch with ``first_index = 0`` equals ``run(inst, steps, seed, start)``.
    """
    if count < 0 or steps < 0:
        raise ValueError("count and steps must be non-negative")
    base = initial_config(inst, start)
    out = np.repeat(base[None, :], count, axis=0)
    if inst.m == 0 or steps == 0 or count == 0:
        return out
    occ = np.repeat(occupancy_of(inst, base)[None, :], count, axis=0)
    eu, ev, table, lam = _kernel_args(inst)
    per_chain = max(1, (1 << 21) // max(steps, 1))
    for lo in range(0, count, per_chain):
        hi = min(count, lo + per_chain)
        rngs = [stream(seed, first_index + i) for i in range(lo, hi)]
        done = 0
        while done < steps:
            k = min(BLOCK, steps - done)
            blocks = [_draw_block(r, inst.m, k) for r in rngs]
            picks = np.stack([b[0] for b in blocks])
            us = np.stack([b[1] for b in blocks])
            _advance_many(eu, ev, table, lam, out[lo:hi], occ[lo:hi], picks, us)
            done += k
    return out
