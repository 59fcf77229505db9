"""Recursive coupling of a Holant instance with its one-vertex downward shift.

Given ``(G, f, lam)`` and a vertex ``v`` with ``f_v(1) > 0``, the procedure
couples ``mu`` (signatures ``f``) and ``mu'`` (``f_v`` replaced by ``D f_v``):

* while the disagreement vertex ``w`` has an undecided incident edge, take
  the smallest such ``e`` whose marginal on the upper side is at least its
  marginal on the lower side, and couple the two Bernoullis with one shared
  uniform (``(0, 1)`` cannot occur);
* both 0 or both 1: keep going at ``w``;
* upper 1, lower 0: the disagreement moves to the other endpoint of ``e``
  and the two sides swap roles;
* once ``w`` has no undecided edge the two conditional laws agree, so the
  remaining edges are sampled once and copied to both sides.

Each side's current instance is its base law conditioned on the decided
edges, so every marginal is a ratio of exact ternary masses.

Trial ``i`` of a batch reads row ``i`` of a ``(trials, 2m)`` uniform block
drawn from ``rng.stream(seed, 0)``: column ``j`` drives the ``j``-th edge
decision, column ``m + e`` the final draw for edge ``e``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import HolantInstance, shift_vertex
from .oracle import Enumeration, TooLarge, enumerate_instance, ternary_powers
from .rng import stream
from .signatures import compute_params

COUPLING_CAP = 20
LAW_CAP = 12
CHOICE_TOL = 1e-12
Z99 = 2.5758293035489004


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class CoupleTrace:
    pair: tuple[np.ndarray, np.ndarray]
    hamming: int
    halted_by_case2: bool
    recursion_depth: int


@dataclass
class CouplingBatch:
    sigma: np.ndarray
    sigma_shifted: np.ndarray
    hamming: np.ndarray
    halted_by_case2: np.ndarray
    depth: np.ndarray
    crossings: int

    def __len__(self):
        return len(self.hamming)

    def trace(self, i: int) -> CoupleTrace:
        return CoupleTrace((self.sigma[i].copy(), self.sigma_shifted[i].copy()),
                           int(self.hamming[i]), bool(self.halted_by_case2[i]), int(self.depth[i]))


def _check(inst: HolantInstance, v: int, cap: int = COUPLING_CAP) -> None:
    if not 0 <= v < inst.n:
        raise IndexError(f"vertex {v} out of range")
    if inst.graph.degree(v) and inst.sigs[v].at(1) <= 0:
        raise PreconditionViolated(f"vertex {v} has f(1) = 0")
    if inst.m > cap:
        raise TooLarge(inst.m, cap, "coupling")


def _shifted(inst: HolantInstance, v: int) -> HolantInstance:
    # an isolated vertex contributes a constant factor, so its shift leaves the law unchanged
    return shift_vertex(inst, v) if inst.graph.degree(v) else inst


def _endpoints(inst: HolantInstance) -> tuple[np.ndarray, np.ndarray]:
    g = inst.graph
    return (np.array([u for u, _ in g.edges], dtype=np.int64),
            np.array([w for _, w in g.edges], dtype=np.int64))


def _incidence_bool(inst: HolantInstance) -> np.ndarray:
    return inst.graph.incidence_matrix.T.astype(bool)


def _conditional_occupancy(enum: Enumeration, t: np.ndarray, cand: np.ndarray, pow3: np.ndarray) -> np.ndarray:
    base = enum.mass(t)
    idx = np.where(cand, t[:, None] - pow3[None, :], t[:, None])
    return np.where(cand, enum.mass(idx) / base[:, None], 0.0)


def couple_batch(inst: HolantInstance, v: int, trials: int, seed: int) -> CouplingBatch:
    """Run ``trials`` independent couplings of ``mu`` and ``mu'`` (shift at ``v``)."""
    _check(inst, v)
    m = inst.m
    enum_a = enumerate_instance(inst)
    enum_b = enumerate_instance(_shifted(inst, v))
    pow3 = ternary_powers(m)
    eu, ev = _endpoints(inst)
    inc = _incidence_bool(inst)
    uni = stream(seed, 0).random((trials, 2 * m))

    full = 3 ** m - 1
    t_s = np.full(trials, full, dtype=np.int64)
    t_p = np.full(trials, full, dtype=np.int64)
    sig = np.zeros((trials, m), dtype=np.uint8)
    sig_p = np.zeros((trials, m), dtype=np.uint8)
    decided = np.zeros((trials, m), dtype=bool)
    w = np.full(trials, v, dtype=np.int64)
    flip = np.zeros(trials, dtype=bool)
    ham = np.zeros(trials, dtype=np.int64)
    depth = np.zeros(trials, dtype=np.int64)
    case2 = np.zeros(trials, dtype=bool)
    active = np.ones(trials, dtype=bool)
    crossings = 0

    for it in range(m + 1):
        act = np.flatnonzero(active)
        if not len(act):
            break
        cand = inc[w[act]] & ~decided[act]
        halting = ~cand.any(axis=1)
        done = act[halting]
        if len(done):
            _finish(done, enum_a, enum_b, t_s, t_p, sig, sig_p, decided, flip, uni, pow3, m)
            case2[done] = ham[done] == 0
            active[done] = False
        rows = act[~halting]
        if not len(rows):
            continue
        cand = cand[~halting]
        q_s = _conditional_occupancy(enum_a, t_s[rows], cand, pow3)
        q_p = _conditional_occupancy(enum_b, t_p[rows], cand, pow3)
        fl = flip[rows][:, None]
        upper = np.where(fl, q_p, q_s)
        lower = np.where(fl, q_s, q_p)
        ok = cand & (upper >= lower - CHOICE_TOL)
        if not ok.any(axis=1).all():
            raise AssertionError("no incident edge with dominating marginal; log-concavity violated?")
        e = np.argmax(ok, axis=1)
        r = np.arange(len(rows))
        pa = upper[r, e]
        pb = np.minimum(lower[r, e], pa)
        draw = uni[rows, it]
        a = draw < pa
        b = draw < pb
        crossings += int(np.sum(~a & b))
        f = flip[rows]
        s_val = np.where(f, b, a).astype(np.int64)
        p_val = np.where(f, a, b).astype(np.int64)
        sig[rows, e] = s_val
        sig_p[rows, e] = p_val
        decided[rows, e] = True
        t_s[rows] -= (2 - s_val) * pow3[e]
        t_p[rows] -= (2 - p_val) * pow3[e]
        split = a & ~b
        ham[rows] += split
        wr = w[rows]
        other = np.where(eu[e] == wr, ev[e], eu[e])
        w[rows] = np.where(split, other, wr)
        flip[rows] = f ^ split
        depth[rows] += 1
    if crossings:
        raise AssertionError(f"{crossings} edge decisions produced (0, 1)")
    return CouplingBatch(sig, sig_p, ham, case2, depth, crossings)


def _finish(rows, enum_a, enum_b, t_s, t_p, sig, sig_p, decided, flip, uni, pow3, m):
    """Sample the undecided edges from the upper side's law and copy them."""
    for use_b in (False, True):
        sel = rows[flip[rows] == use_b]
        if not len(sel):
            continue
        enum = enum_b if use_b else enum_a
        t = (t_p if use_b else t_s)[sel].copy()
        for e in range(m):
            free = ~decided[sel, e]
            if not free.any():
                continue
            tf = t[free]
            q = enum.mass(tf - pow3[e]) / enum.mass(tf)
            bit = (uni[sel[free], m + e] < q).astype(np.int64)
            t[free] = tf - (2 - bit) * pow3[e]
            tgt = sel[free]
            sig[tgt, e] = bit
            sig_p[tgt, e] = bit


def couple(inst: HolantInstance, v: int, seed: int) -> CoupleTrace:
    """One coupled pair; identical to trial 0 of ``couple_batch`` with the same seed."""
    return couple_batch(inst, v, 1, seed).trace(0)


@dataclass(frozen=True)
class W1Estimate:
    mean: float
    ci_half_width: float
    std_error: float
    trials: int
    bound: float
    case2_fraction: float

    @property
    def passed(self) -> bool:
        return self.mean - 3 * self.std_error <= self.bound


def _summarize(ham: np.ndarray, bound: float, case2: np.ndarray) -> W1Estimate:
    trials = len(ham)
    mean = float(ham.mean()) if trials else 0.0
    se = float(ham.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    frac = float(case2.mean()) if trials else 0.0
    return W1Estimate(mean, Z99 * se, se, trials, bound, frac)


def estimate_w1(inst: HolantInstance, v: int, trials: int, seed: int) -> W1Estimate:
    """Monte Carlo mean Hamming distance with a 99% normal half-width.

    ``bound`` is ``P_max - 1``.
    """
    batch = couple_batch(inst, v, trials, seed)
    return _summarize(batch.hamming, compute_params(inst).p_max - 1.0, batch.halted_by_case2)


# --- exact law -----------------------------------------------------------

def coupling_law(inst: HolantInstance, v: int) -> dict[tuple[int, int], float]:
    """Exact joint law of the coupled pair as ``{(mask, mask'): probability}``."""
    _check(inst, v, LAW_CAP)
    m = inst.m
    enum_a = enumerate_instance(inst)
    enum_b = enumerate_instance(_shifted(inst, v))
    pow3 = [3 ** e for e in range(m)]
    g = inst.graph
    law: dict[tuple[int, int], float] = {}

    def mass(enum, t):
        return float(enum.mass(np.array([t]))[0])

    def finish(t_up, enum_up, decided, s_bits, p_bits, flip, prob):
        free = [e for e in range(m) if not (decided >> e) & 1]
        stack = [(t_up, 0, 0, prob)]
        while stack:
            t, i, bits, pr = stack.pop()
            if i == len(free):
                key = (s_bits | bits, p_bits | bits)
                law[key] = law.get(key, 0.0) + pr
                continue
            e = free[i]
            base = mass(enum_up, t)
            q = mass(enum_up, t - pow3[e]) / base
            if q > 0:
                stack.append((t - pow3[e], i + 1, bits | (1 << e), pr * q))
            if q < 1:
                stack.append((t - 2 * pow3[e], i + 1, bits, pr * (1 - q)))

    def step(t_s, t_p, w, flip, decided, s_bits, p_bits, prob):
        cand = [e for e in g.incidence[w] if not (decided >> e) & 1]
        if not cand:
            if flip:
                finish(t_p, enum_b, decided, s_bits, p_bits, flip, prob)
            else:
                finish(t_s, enum_a, decided, s_bits, p_bits, flip, prob)
            return
        qs = {e: mass(enum_a, t_s - pow3[e]) / mass(enum_a, t_s) for e in cand}
        qp = {e: mass(enum_b, t_p - pow3[e]) / mass(enum_b, t_p) for e in cand}
        up, lo = (qp, qs) if flip else (qs, qp)
        e = next((e for e in cand if up[e] >= lo[e] - CHOICE_TOL), None)
        if e is None:
            raise AssertionError("no incident edge with dominating marginal")
        pa = up[e]
        pb = min(lo[e], pa)
        bit = 1 << e
        dec = decided | bit
        # both 1, both 0, split (upper 1 / lower 0)
        for a, b, pr in ((1, 1, pb), (0, 0, 1 - pa), (1, 0, pa - pb)):
            if pr <= 0:
                continue
            sv, pv = (b, a) if flip else (a, b)
            nt_s = t_s - (2 - sv) * pow3[e]
            nt_p = t_p - (2 - pv) * pow3[e]
            ns = s_bits | (bit if sv else 0)
            np_ = p_bits | (bit if pv else 0)
            if a != b:
                step(nt_s, nt_p, g.other_end(e, w), not flip, dec, ns, np_, prob * pr)
            else:
                step(nt_s, nt_p, w, flip, dec, ns, np_, prob * pr)

    full = 3 ** m - 1
    step(full, full, v, False, 0, 0, 0, 1.0)
    return law


def law_marginals(law: dict[tuple[int, int], float], m: int) -> tuple[np.ndarray, np.ndarray]:
    """Distributions of each side of a coupling law, indexed by mask."""
    first = np.zeros(1 << m)
    second = np.zeros(1 << m)
    for (a, b), p in law.items():
        first[a] += p
        second[b] += p
    return first, second


def law_expected_hamming(law: dict[tuple[int, int], float]) -> float:
    return math.fsum(p * bin(a ^ b).count("1") for (a, b), p in law.items())


# --- two shifts ------------------------------------------------------------

def _check_two(inst: HolantInstance, u: int, v: int) -> HolantInstance:
    _check(inst, u, LAW_CAP)
    mid = _shifted(inst, u)
    if mid.graph.degree(v) and mid.sigs[v].at(1) <= 0:
        raise PreconditionViolated(f"vertex {v} has f(1) = 0 after shifting vertex {u}")
    return mid


def couple_two_shifts_batch(inst: HolantInstance, u: int, v: int, trials: int, seed: int) -> CouplingBatch:
    """Glue the ``u``-shift and ``v``-shift couplings along the middle sample.

    The first pair comes from ``couple_batch(inst, u)``; the last sample is
    drawn from the exact law of the second coupling conditioned on the
    shared middle sample (uniforms from ``rng.stream(seed, 1)``).
    """
    mid = _check_two(inst, u, v)
    first = couple_batch(inst, u, trials, seed)
    law = coupling_law(mid, v)
    by_mid: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for (a, b), p in sorted(law.items()):
        by_mid.setdefault(a, ([], []))
        by_mid[a][0].append(b)
        by_mid[a][1].append(p)
    m = inst.m
    weights_bits = 1 << np.arange(m, dtype=np.int64)
    mids = first.sigma_shifted.astype(np.int64) @ weights_bits if m else np.zeros(trials, dtype=np.int64)
    draws = stream(seed, 1).random(trials)
    last = np.zeros(trials, dtype=np.int64)
    for key in np.unique(mids):
        if int(key) not in by_mid:
            raise AssertionError("middle sample outside the support of the second coupling")
        targets, probs = by_mid[int(key)]
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        rows = np.flatnonzero(mids == key)
        pick = np.minimum(np.searchsorted(cdf, draws[rows], side="right"), len(targets) - 1)
        last[rows] = np.asarray(targets)[pick]
    last_cfg = ((last[:, None] >> np.arange(m)) & 1).astype(np.uint8)
    ham = np.sum(first.sigma != last_cfg, axis=1)
    return CouplingBatch(first.sigma, last_cfg, ham, first.halted_by_case2, first.depth, first.crossings)


def couple_two_shifts(inst: HolantInstance, u: int, v: int, seed: int) -> CoupleTrace:
    return couple_two_shifts_batch(inst, u, v, 1, seed).trace(0)


def estimate_w1_two_shifts(inst: HolantInstance, u: int, v: int, trials: int, seed: int) -> W1Estimate:
    """Composed estimate; ``bound`` is ``2 (P_max - 1)``."""
    batch = couple_two_shifts_batch(inst, u, v, trials, seed)
    return _summarize(batch.hamming, 2 * (compute_params(inst).p_max - 1.0), batch.halted_by_case2)
