"""Brute-force ground truth for desk-scale instances.

Configurations are ints with bit ``e`` for edge ``e``. A partial assignment
(pinning) is addressed by its *ternary index* ``t = sum_e digit_e * 3**e``
where ``digit_e`` is the pinned value or 2 for a free edge. The ternary mass
table ``M[t]`` holds the total weight of configurations consistent with the
assignment, so every conditional probability is a ratio of two entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Pinning, config_to_mask
from .model import HolantInstance, shift_vertex
from .signatures import compute_params, gen_poly_eval

ENUM_CAP = 28
TABLE_CAP = 14
SWEEP_CAP = 14
CHAIN_CAP = 14
SLEM_CAP = 10
IMAG_RTOL = 1e-8
BOUND_RTOL = 1e-12
_CHUNK = 1 << 20


class TooLarge(ValueError):
    def __init__(self, m: int, cap: int, what: str = "enumeration"):
        super().__init__(f"{what} needs at most {cap} edges, instance has {m}")
        self.cap = cap
        self.m = m


class ZeroProbabilityPinning(ValueError):
    pass


def _check_cap(m: int, cap: int, what: str = "enumeration") -> None:
    if m > cap:
        raise TooLarge(m, cap, what)


def _bits(start: int, stop: int, m: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(np.int64)


def config_weights(inst: HolantInstance) -> np.ndarray:
    """Weight of every configuration, indexed by bit mask."""
    g = inst.graph
    m = g.m
    _check_cap(m, ENUM_CAP)
    total = 1 << m
    out = np.empty(total)
    inc = g.incidence_matrix
    table = inst.sig_table
    rows = np.arange(g.n)
    log_lam = np.log(np.asarray(inst.lambdas)) if m else np.zeros(0)
    for start in range(0, total, _CHUNK):
        stop = min(total, start + _CHUNK)
        bits = _bits(start, stop, m)
        occ = bits @ inc
        w = np.prod(table[rows[None, :], occ], axis=1) if g.n else np.ones(stop - start)
        if m:
            w = w * np.exp(bits @ log_lam)
        out[start:stop] = w
    return out


def ternary_powers(m: int) -> np.ndarray:
    return 3 ** np.arange(m, dtype=np.int64)


def pinning_index(pin: Pinning, m: int) -> int:
    t = 3 ** m - 1
    for e, val in pin.values.items():
        t -= (2 - val) * 3 ** e
    return t


def pinning_from_index(t: int, m: int) -> Pinning:
    vals = {}
    for e in range(m):
        digit = t % 3
        t //= 3
        if digit != 2:
            vals[e] = digit
    return Pinning(vals)


def decode_digits(t: np.ndarray, m: int) -> np.ndarray:
    return (np.asarray(t, dtype=np.int64)[:, None] // ternary_powers(m)[None, :]) % 3


class Enumeration:
    """Exhaustive weights of one instance plus cached derived tables."""

    def __init__(self, inst: HolantInstance):
        self.inst = inst
        self.m = inst.m
        self.weights = config_weights(inst)
        self._mass_cache: dict[int, float] = {}

    @cached_property
    def z(self) -> float:
        return math.fsum(np.sum(self.weights[i:i + _CHUNK]) for i in range(0, len(self.weights), _CHUNK))

    @cached_property
    def table(self) -> np.ndarray:
        """Ternary mass table of length ``3**m``."""
        _check_cap(self.m, TABLE_CAP, "ternary mass table")
        m = self.m
        arr = self.weights.reshape((2,) * m) if m else self.weights.copy()
        # axis k of the C-order reshape carries edge m-1-k
        for axis in range(m):
            arr = np.concatenate([arr, arr.sum(axis=axis, keepdims=True)], axis=axis)
        return arr.reshape(-1)

    @property
    def has_table(self) -> bool:
        return self.m <= TABLE_CAP

    def _mass_direct(self, t: int) -> float:
        cached = self._mass_cache.get(t)
        if cached is None:
            mask = bits = 0
            rest = t
            for e in range(self.m):
                digit = rest % 3
                rest //= 3
                if digit != 2:
                    mask |= 1 << e
                    bits |= digit << e
            idx = np.arange(len(self.weights), dtype=np.int64)
            cached = float(np.sum(self.weights[(idx & mask) == bits]))
            self._mass_cache[t] = cached
        return cached

    def mass(self, t: np.ndarray | int) -> np.ndarray:
        """Mass of the partial assignments with ternary indices ``t``."""
        t_arr = np.asarray(t, dtype=np.int64)
        if self.has_table:
            return self.table[t_arr]
        flat = t_arr.reshape(-1)
        out = np.array([self._mass_direct(int(x)) for x in flat])
        return out.reshape(t_arr.shape)

    def conditional(self, pin: Pinning) -> tuple[np.ndarray, np.ndarray]:
        """Consistent configurations and their normalized probabilities."""
        pin.check(self.inst.graph)
        idx = np.arange(len(self.weights), dtype=np.int64)
        keep = (idx & pin.mask) == pin.bits
        cfgs, w = idx[keep], self.weights[keep]
        total = w.sum()
        if total <= 0:
            raise ZeroProbabilityPinning(f"pinning {dict(pin.values)} has probability zero")
        return cfgs, w / total

    def distribution(self) -> np.ndarray:
        return self.weights / self.z


_ENUM_CACHE: dict[int, tuple[HolantInstance, Enumeration]] = {}


def enumerate_instance(inst: HolantInstance) -> Enumeration:
    """Enumeration for ``inst``, reused while the same object is alive."""
    hit = _ENUM_CACHE.get(id(inst))
    if hit is not None and hit[0] is inst:
        return hit[1]
    enum = Enumeration(inst)
    if len(_ENUM_CACHE) > 64:
        _ENUM_CACHE.clear()
    _ENUM_CACHE[id(inst)] = (inst, enum)
    return enum


def partition_function(inst: HolantInstance) -> float:
    return enumerate_instance(inst).z


def gibbs_distribution(inst: HolantInstance) -> np.ndarray:
    return enumerate_instance(inst).distribution()


def marginal(inst: HolantInstance, pin: Pinning, e: int) -> float:
    """``mu^tau(sigma_e = 1)``."""
    if e in pin.domain:
        raise ValueError(f"edge {e} is pinned")
    if not 0 <= e < inst.m:
        raise KeyError(f"unknown edge {e}")
    cfgs, prob = enumerate_instance(inst).conditional(pin)
    return float(np.sum(prob[(cfgs >> e) & 1 == 1]))


def marginals(inst: HolantInstance, pin: Pinning | None = None) -> np.ndarray:
    """Occupation probability of every edge (pinned edges report their value)."""
    pin = pin or Pinning()
    cfgs, prob = enumerate_instance(inst).conditional(pin)
    bits = ((cfgs[:, None] >> np.arange(inst.m)) & 1).astype(float)
    return prob @ bits


@dataclass(frozen=True)
class InfluenceMatrix:
    entries: np.ndarray
    basis: tuple[int, ...]

    def eigenvalues(self) -> np.ndarray:
        return checked_real_eigenvalues(self.entries)

    @property
    def lambda_max(self) -> float:
        ev = self.eigenvalues()
        return float(ev.max()) if ev.size else 0.0

    def row_abs_sum(self, e: int) -> float:
        i = self.basis.index(e)
        return float(np.abs(self.entries[i]).sum())


def checked_real_eigenvalues(mat: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real-spectrum matrix with the imaginary-part check."""
    if mat.size == 0:
        return np.zeros(0)
    ev = np.linalg.eigvals(mat)
    radius = float(np.max(np.abs(ev)))
    if np.max(np.abs(ev.imag)) > IMAG_RTOL * radius:
        raise ArithmeticError(f"influence matrix has complex eigenvalues: {ev}")
    return ev.real


def influence_matrix(inst: HolantInstance, pin: Pinning | None = None) -> InfluenceMatrix:
    """Pairwise influence matrix over the unpinned edges.

    Row ``e`` is zero when ``sigma_e`` is deterministic under the pinning.
    """
    pin = pin or Pinning()
    cfgs, prob = enumerate_instance(inst).conditional(pin)
    basis = tuple(e for e in range(inst.m) if e not in pin.domain)
    k = len(basis)
    if not k:
        return InfluenceMatrix(np.zeros((0, 0)), basis)
    bits = ((cfgs[:, None] >> np.asarray(basis)) & 1).astype(float)
    p1 = prob @ bits
    joint = bits.T @ (prob[:, None] * bits)
    mat = np.zeros((k, k))
    for i in range(k):
        if not (0 < p1[i] < 1):
            continue
        on = joint[i] / p1[i]
        off = (p1 - joint[i]) / (1 - p1[i])
        mat[i] = on - off
        mat[i, i] = 0.0
    return InfluenceMatrix(mat, basis)


# --- all-pinnings sweeps -------------------------------------------------

@dataclass
class PinningChunk:
    t: np.ndarray          # ternary indices of feasible pinnings
    digits: np.ndarray     # (k, m)
    mass: np.ndarray       # (k,)
    occ: np.ndarray        # (k, m): mass of t with edge set to 1 (free edges only, else nan)


def iter_feasible_pinnings(enum: Enumeration, chunk: int | None = None) -> Iterator[PinningChunk]:
    """All partial assignments with positive mass, in ternary-index order."""
    m = enum.m
    _check_cap(m, SWEEP_CAP, "all-pinnings sweep")
    table = enum.table
    pow3 = ternary_powers(m)
    total = 3 ** m
    chunk = chunk or max(1, (1 << 22) // (m * m + 1))
    for start in range(0, total, chunk):
        t = np.arange(start, min(total, start + chunk), dtype=np.int64)
        mass = table[t]
        keep = mass > 0
        t, mass = t[keep], mass[keep]
        digits = decode_digits(t, m)
        free = digits == 2
        idx = np.where(free, t[:, None] - pow3[None, :], 0)
        occ = np.where(free, table[idx], np.nan)
        yield PinningChunk(t, digits, mass, occ)


def _influence_batch(enum: Enumeration, ch: PinningChunk) -> np.ndarray:
    m = enum.m
    table = enum.table
    pow3 = ternary_powers(m)
    k = len(ch.t)
    free = ch.digits == 2
    out = np.zeros((k, m, m))
    for e in range(m):
        rows = free[:, e] & (ch.occ[:, e] > 0) & (ch.occ[:, e] < ch.mass)
        if not rows.any():
            continue
        t = ch.t[rows]
        sub_free = free[rows]
        cond = []
        for val in (1, 0):
            te = t - (2 - val) * pow3[e]
            me = table[te]
            idx = np.where(sub_free, te[:, None] - pow3[None, :], 0)
            cond.append(np.where(sub_free, table[idx] / me[:, None], 0.0))
        row = cond[0] - cond[1]
        row[:, e] = 0.0
        out[rows, e, :] = row
    return out


@dataclass(frozen=True)
class SIResult:
    value: float
    argmax_pinning: Pinning
    feasible_pinnings: int
    max_imag_ratio: float


def spectral_independence_constant(inst: HolantInstance) -> SIResult:
    """Largest influence-matrix eigenvalue over every feasible pinning."""
    enum = enumerate_instance(inst)
    best, best_t, count, worst_imag = 0.0, 3 ** enum.m - 1, 0, 0.0
    if enum.m == 0:
        return SIResult(0.0, Pinning(), 1, 0.0)
    for ch in iter_feasible_pinnings(enum):
        count += len(ch.t)
        mats = _influence_batch(enum, ch)
        ev = np.linalg.eigvals(mats)
        radius = np.max(np.abs(ev), axis=1)
        imag = np.max(np.abs(ev.imag), axis=1)
        ratio = np.where(radius > 0, imag / np.where(radius > 0, radius, 1.0), 0.0)
        worst_imag = max(worst_imag, float(ratio.max()))
        top = ev.real.max(axis=1)
        i = int(np.argmax(top))
        if top[i] > best:
            best, best_t = float(top[i]), int(ch.t[i])
    if worst_imag > IMAG_RTOL:
        raise ArithmeticError(f"influence matrix spectrum not real (imag/radius = {worst_imag:.3g})")
    return SIResult(best, pinning_from_index(best_t, enum.m), count, worst_imag)


@dataclass
class BoundReport:
    """Rows ``(pinning_id, edge/vertex, check, lhs, rhs, passed)``."""

    pinning_id: np.ndarray
    item: np.ndarray
    check: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    passed: np.ndarray = field(init=False)
    tolerance: float = BOUND_RTOL
    equality: np.ndarray | None = None

    def __post_init__(self):
        ge = self.lhs >= self.rhs * (1 - self.tolerance) - 1e-300
        if self.equality is not None:
            ge = np.where(self.equality, self.lhs == self.rhs, ge)
        self.passed = ge

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    def __len__(self):
        return len(self.lhs)

    def rows(self) -> Iterator[tuple]:
        for i in range(len(self.lhs)):
            yield (int(self.pinning_id[i]), int(self.item[i]), str(self.check[i]),
                   float(self.lhs[i]), float(self.rhs[i]), bool(self.passed[i]))


def verify_all_zero_bound(inst: HolantInstance) -> BoundReport:
    """``mu(sigma_{E_v} = 0) >= 1 / P_{f_v}(r_max * lambda_max)`` for each vertex."""
    params = compute_params(inst)
    enum = enumerate_instance(inst)
    g = inst.graph
    x = params.r_max * params.lambda_max
    idx = np.arange(len(enum.weights), dtype=np.int64)
    lhs, rhs = [], []
    for v in range(g.n):
        mask = 0
        for e in g.incidence[v]:
            mask |= 1 << e
        lhs.append(float(np.sum(enum.weights[(idx & mask) == 0]) / enum.z))
        rhs.append(1.0 / gen_poly_eval(inst.sigs[v], x, g.degrees[v]))
    n = g.n
    return BoundReport(np.full(n, 3 ** g.m - 1), np.arange(n), np.array(["all_zero"] * n),
                       np.array(lhs), np.array(rhs))


def verify_marginal_bounds(inst: HolantInstance) -> BoundReport:
    """Marginal lower bounds under every feasible pinning.

    For each free edge that can be occupied: ``mu(sigma_e=0) >= 1/P_max`` and
    ``mu(sigma_e=1) >= r_min^2 lambda_min / P_max^2``; otherwise the check is
    ``mu(sigma_e=1) == 0``.
    """
    params = compute_params(inst)
    enum = enumerate_instance(inst)
    zero_rhs = 1.0 / params.p_max
    one_rhs = params.r_min ** 2 * params.lambda_min / params.p_max ** 2
    parts: dict[str, list] = {k: [] for k in ("pid", "edge", "check", "lhs", "rhs", "eq")}
    for ch in iter_feasible_pinnings(enum):
        free = ch.digits == 2
        p1 = np.where(free, ch.occ / ch.mass[:, None], np.nan)
        rows, edges = np.nonzero(free)
        q = p1[rows, edges]
        occupiable = q > 0
        pid = ch.t[rows]
        for name, sel, lhs, rhs, eq in (
            ("zero", occupiable, 1 - q, zero_rhs, False),
            ("one", occupiable, q, one_rhs, False),
            ("unoccupiable", ~occupiable, q, 0.0, True),
        ):
            k = int(sel.sum())
            parts["pid"].append(pid[sel])
            parts["edge"].append(edges[sel])
            parts["check"].append(np.full(k, name))
            parts["lhs"].append(lhs[sel])
            parts["rhs"].append(np.full(k, rhs))
            parts["eq"].append(np.full(k, eq))
    cat = {k: np.concatenate(v) if v else np.zeros(0) for k, v in parts.items()}
    return BoundReport(cat["pid"], cat["edge"], cat["check"], cat["lhs"], cat["rhs"],
                       equality=cat["eq"].astype(bool))


@dataclass(frozen=True)
class MonotonicityCheck:
    vertex: int
    expected_occupancy: float
    expected_occupancy_shifted: float
    edge_marginals: tuple[float, ...]
    edge_marginals_shifted: tuple[float, ...]
    dominating_edge: int | None

    @property
    def passed(self) -> bool:
        ok = self.expected_occupancy >= self.expected_occupancy_shifted - 1e-12
        return ok and (self.dominating_edge is not None or not self.edge_marginals)


def check_monotonicity(inst: HolantInstance, v: int) -> MonotonicityCheck:
    """Compare occupancy at ``v`` under ``f_v`` and ``D f_v``."""
    if inst.sigs[v].at(1) <= 0:
        raise ValueError(f"vertex {v} has f(1) = 0; the shifted instance is not defined")
    shifted = shift_vertex(inst, v)
    edges = inst.graph.incidence[v]
    a = marginals(inst)[list(edges)] if edges else np.zeros(0)
    b = marginals(shifted)[list(edges)] if edges else np.zeros(0)
    dom = next((e for e, x, y in zip(edges, a, b) if x >= y - 1e-12), None)
    return MonotonicityCheck(v, float(a.sum()), float(b.sum()), tuple(a.tolist()),
                             tuple(b.tolist()), dom)


# --- exact Glauber chain -------------------------------------------------

@dataclass(frozen=True)
class TransitionOperator:
    states: np.ndarray          # configuration masks of the support, ascending
    matrix: sp.csr_matrix       # row-stochastic on the support
    pi: np.ndarray              # Gibbs distribution on the support

    def index_of(self, mask: int) -> int:
        i = int(np.searchsorted(self.states, mask))
        if i >= len(self.states) or self.states[i] != mask:
            raise ValueError(f"configuration {mask:#x} has zero weight")
        return i


def glauber_transition(inst: HolantInstance) -> TransitionOperator:
    """Heat-bath single-edge Glauber kernel restricted to positive-weight states."""
    m = inst.m
    _check_cap(m, CHAIN_CAP, "exact chain")
    enum = enumerate_instance(inst)
    w = enum.weights
    states = np.flatnonzero(w > 0).astype(np.int64)
    pos = np.full(len(w), -1, dtype=np.int64)
    pos[states] = np.arange(len(states))
    if m == 0:
        return TransitionOperator(states, sp.csr_matrix(np.ones((1, 1))), np.ones(1))
    rows, cols, vals = [], [], []
    for e in range(m):
        bit = 1 << e
        on = states | bit
        off = states & ~bit
        w_on, w_off = w[on], w[off]
        p = w_on / (w_on + w_off)
        for target, prob in ((on, p), (off, 1 - p)):
            keep = prob > 0
            rows.append(np.flatnonzero(keep))
            cols.append(pos[target[keep]])
            vals.append(prob[keep] / m)
    k = len(states)
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(k, k)).tocsr()
    mat.sum_duplicates()
    pi = w[states] / enum.z
    return TransitionOperator(states, mat, pi)


def stationarity_error(op: TransitionOperator) -> float:
    return float(np.max(np.abs(op.matrix.T @ op.pi - op.pi)))


def detailed_balance_error(op: TransitionOperator) -> float:
    flow = sp.diags(op.pi) @ op.matrix
    diff = flow - flow.T
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def slem(op: TransitionOperator) -> float:
    """Second-largest eigenvalue modulus via the symmetrized kernel."""
    _check_cap(int(np.log2(max(len(op.states), 1))), SLEM_CAP, "dense spectrum")
    root = np.sqrt(op.pi)
    sym = (root[:, None] * op.matrix.toarray()) / root[None, :]
    sym = (sym + sym.T) / 2
    ev = np.sort(np.abs(np.linalg.eigvalsh(sym)))
    return float(ev[-2]) if len(ev) > 1 else 0.0


@dataclass(frozen=True)
class ChainEvolution:
    steps: tuple[int, ...]
    tv: tuple[float, ...]
    final: np.ndarray
    slem: float | None


def chain_distribution_evolution(inst: HolantInstance, start: Sequence[int] | int | str,
                                 steps: int, checkpoints: Sequence[int] | None = None) -> ChainEvolution:
    """Exact law of the chain from a point mass, with TV to Gibbs at checkpoints.

    ``start`` is a mask, a 0/1 vector, or ``"empty"``. Checkpoints default to
    every step. The SLEM is reported when the instance has at most 10 edges.
    """
    op = glauber_transition(inst)
    if isinstance(start, str):
        if start != "empty":
            raise ValueError(f"unknown start {start!r}")
        start = 0
    mask = start if isinstance(start, (int, np.integer)) else config_to_mask(start)
    x = np.zeros(len(op.states))
    x[op.index_of(int(mask))] = 1.0
    wanted = set(range(steps + 1)) if checkpoints is None else set(checkpoints)
    out_steps, out_tv = [], []
    pt = op.matrix.T.tocsr()
    for s in range(steps + 1):
        if s in wanted:
            out_steps.append(s)
            out_tv.append(0.5 * float(np.abs(x - op.pi).sum()))
        if s < steps:
            x = pt @ x
    gap = slem(op) if inst.m <= SLEM_CAP else None
    return ChainEvolution(tuple(out_steps), tuple(out_tv), x, gap)


def steps_to_tv(inst: HolantInstance, start: int, threshold: float = 0.1, max_steps: int = 100_000) -> int:
    """First step at which the exact chain from ``start`` is within ``threshold`` of Gibbs."""
    op = glauber_transition(inst)
    x = np.zeros(len(op.states))
    x[op.index_of(int(start))] = 1.0
    pt = op.matrix.T.tocsr()
    for s in range(max_steps + 1):
        if 0.5 * float(np.abs(x - op.pi).sum()) <= threshold:
            return s
        x = pt @ x
    raise RuntimeError(f"TV did not reach {threshold} within {max_steps} steps")


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# --- W1 bracket -------------------------------------------------------------

@dataclass(frozen=True)
class W1Bracket:
    lower: float
    upper: float
    half_width: float
    shifted_vertices: tuple[int, ...]

    @property
    def consistent(self) -> bool:
        return self.lower <= self.upper + 3 * self.half_width / 2.576 + 1e-12


def _shift_vertices(a: HolantInstance, b: HolantInstance) -> tuple[int, ...]:
    if a.graph != b.graph or a.lambdas != b.lambdas:
        raise ValueError("W1 bracket needs two instances on the same graph and weights")
    out = []
    for v in range(a.n):
        deg = a.graph.degrees[v]
        fa, fb = a.sigs[v].truncated(deg), b.sigs[v].truncated(deg)
        if fa == fb:
            continue
        if shift_vertex(a, v).sigs[v].truncated(deg) == fb:
            out.append(v)
            continue
        raise ValueError(f"vertex {v}: second signature is not the downward shift of the first")
    if len(out) > 2:
        raise ValueError("instances differ at more than two vertices")
    return tuple(out)


def w1_bracket(inst_a: HolantInstance, inst_b: HolantInstance, trials: int = 10_000,
               seed: int = 0) -> W1Bracket:
    """Bracket ``W1(mu_a, mu_b)`` for instances related by one or two shifts.

    Lower: the sum of absolute marginal differences. Upper: mean Hamming
    distance of coupled samples (one shift uses the recursive coupling, two
    shifts compose two of them), with its 99% half-width.
    """
    from . import coupling

    shifted = _shift_vertices(inst_a, inst_b)
    lower = float(np.abs(marginals(inst_a) - marginals(inst_b)).sum())
    if not shifted:
        return W1Bracket(lower, 0.0, 0.0, shifted)
    if len(shifted) == 1:
        est = coupling.estimate_w1(inst_a, shifted[0], trials, seed)
    else:
        est = coupling.estimate_w1_two_shifts(inst_a, shifted[0], shifted[1], trials, seed)
    return W1Bracket(lower, est.mean, est.ci_half_width, shifted)
