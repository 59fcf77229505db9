"""Counting, sweeps, counterexample families and mixing diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy.stats import chi2, norm

from . import coupling, glauber
from .graph import Graph, Pinning, connected_graphs, gen_graph, path_graph, pendant_path_graph, random_graph
from .model import HolantInstance, build_b_matching, induced, shift_vertex
from .oracle import (
    check_monotonicity,
    enumerate_instance,
    influence_matrix,
    marginal,
    spectral_independence_constant,
    steps_to_tv,
    verify_all_zero_bound,
    verify_marginal_bounds,
)
from .parallel import ordered_map
from .rng import split_seed, stream
from .signatures import Signature, compute_params, remark_b_matching_bound

SI_RTOL = 1e-9


# --- counting --------------------------------------------------------------

@dataclass(frozen=True)
class CountEstimate:
    log_z: float
    relative_error_target: float
    samples_per_marginal: int
    edge_order: tuple[int, ...]
    factors: tuple[float, ...]
    steps_per_sample: int
    confidence: float

    @property
    def z(self) -> float:
        return math.exp(self.log_z)


def default_steps(m: int) -> int:
    return max(50, math.ceil(20 * m * math.log(m + 1)))


def samples_for(eps: float, factors: int, p_max: float, confidence: float) -> int:
    """Chains per factor so that log Z is within ``log(1 + eps)`` at ``confidence``.

    Each factor is at least ``1/P_max``, so its relative variance from ``N``
    Bernoulli draws is at most ``(P_max - 1)/N``.
    """
    if factors == 0 or p_max <= 1:
        return 0
    z = norm.ppf(0.5 + confidence / 2)
    return math.ceil(z * z * factors * (p_max - 1) / math.log1p(eps) ** 2)


def _base_log_weight(inst: HolantInstance) -> float:
    return math.fsum(math.log(f.values[0]) for f in inst.sigs)


def estimate_log_z(inst: HolantInstance, eps: float, seed: int, confidence: float = 0.99,
                   steps: int | None = None) -> CountEstimate:
    """Estimate ``log Z`` by pinning edges to 0 one at a time in id order.

    ``Z = prod_v f_v(0) / prod_i mu(sigma_{e_i} = 0 | earlier edges 0)``; each
    factor is the fraction of Glauber samples on the induced instance with
    ``e_i`` unoccupied.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    params = compute_params(inst)
    order = tuple(range(inst.m))
    needed = [i for i in order if _factor_needs_sampling(inst, i)]
    n_samples = samples_for(eps, len(needed), params.p_max, confidence)
    step_count = default_steps(inst.m) if steps is None else steps
    factors = []
    for i in order:
        if i not in needed:
            factors.append(1.0)
            continue
        sub, _ = induced(inst, Pinning({j: 0 for j in range(i)}))
        draws = glauber.sample_batch(sub, n_samples, step_count, split_seed(seed, i))
        factors.append(float(np.mean(draws[:, 0] == 0)))
    log_z = _base_log_weight(inst) - math.fsum(math.log(q) for q in factors)
    return CountEstimate(log_z, eps, n_samples, order, tuple(factors), step_count, confidence)


def _factor_needs_sampling(inst: HolantInstance, i: int) -> bool:
    u, v = inst.graph.edges[i]
    return inst.sigs[u].at(1) > 0 and inst.sigs[v].at(1) > 0


def exact_log_z_telescoped(inst: HolantInstance) -> float:
    """Telescoping product with exact conditional marginals."""
    total = _base_log_weight(inst)
    for i in range(inst.m):
        q0 = 1.0 - marginal(inst, Pinning({j: 0 for j in range(i)}), i)
        total -= math.log(q0)
    return total


# --- sweeps ----------------------------------------------------------------

@dataclass(frozen=True)
class SweepCase:
    case_id: int
    graph: Graph
    b: int
    lam: float
    instance: HolantInstance

    @property
    def label(self) -> str:
        edges = " ".join(f"{u}-{v}" for u, v in self.graph.edges)
        return f"n={self.graph.n} [{edges}]"


def standard_sweep(max_vertices: int = 5, bs: Sequence[int] = (1, 2),
                   lambdas: Sequence[float] = (0.5, 1.0, 2.0),
                   graphs: Iterable[Graph] | None = None) -> list[SweepCase]:
    """Connected graphs with at most ``max_vertices`` vertices, times b, times lambda."""
    graphs = list(graphs) if graphs is not None else connected_graphs(max_vertices)
    cases = []
    for g in graphs:
        for b in bs:
            for lam in lambdas:
                cases.append(SweepCase(len(cases), g, int(b), float(lam), build_b_matching(g, b, lam)))
    return cases


def sweep_from_spec(spec: dict) -> list[SweepCase]:
    """Sweep cases from a JSON-style spec.

    Keys: ``max_vertices`` (default 5) or ``graphs`` (generator spec strings),
    ``b`` (list, default [1, 2]) and ``lambda`` (list, default [0.5, 1, 2]).
    """
    graphs = None
    if "graphs" in spec:
        graphs = [gen_graph(s, int(spec.get("seed", 0))) for s in spec["graphs"]]
    return standard_sweep(int(spec.get("max_vertices", 5)), spec.get("b", [1, 2]),
                          spec.get("lambda", [0.5, 1.0, 2.0]), graphs)


@dataclass(frozen=True)
class SIRow:
    case_id: int
    label: str
    n: int
    m: int
    b: int
    lam: float
    si_constant: float
    p_max: float
    bound: float
    remark_p_max_bound: float | None
    feasible_pinnings: int

    @property
    def passed(self) -> bool:
        ok = self.si_constant <= self.bound * (1 + SI_RTOL) + SI_RTOL
        if self.remark_p_max_bound is not None:
            ok = ok and self.p_max <= self.remark_p_max_bound * (1 + SI_RTOL)
        return ok


def _si_row(case: SweepCase) -> SIRow:
    params = compute_params(case.instance)
    res = spectral_independence_constant(case.instance)
    remark = None
    if case.lam == 1.0 and 1 <= case.b < params.delta:
        remark = float(remark_b_matching_bound(params.delta, case.b))
    return SIRow(case.case_id, case.label, case.graph.n, case.graph.m, case.b, case.lam,
                 res.value, params.p_max, 2 * (params.p_max - 1), remark, res.feasible_pinnings)


def si_sweep(cases: Sequence[SweepCase] | dict) -> list[SIRow]:
    """Spectral-independence constant against ``2 (P_max - 1)`` for each case."""
    if isinstance(cases, dict):
        cases = sweep_from_spec(cases)
    return ordered_map(_si_row, cases)


@dataclass(frozen=True)
class LemmaRow:
    case_id: int
    all_zero_passed: bool
    marginal_passed: bool
    monotone_passed: bool
    checks: int
    worst_all_zero_slack: float


def _lemma_row(case: SweepCase) -> LemmaRow:
    inst = case.instance
    az = verify_all_zero_bound(inst)
    mb = verify_marginal_bounds(inst)
    mono = all(check_monotonicity(inst, v).passed for v in range(inst.n) if inst.sigs[v].at(1) > 0)
    slack = float(np.min(az.lhs - az.rhs)) if len(az) else 0.0
    return LemmaRow(case.case_id, az.all_passed, mb.all_passed, mono, len(az) + len(mb), slack)


def lemma_sweep(cases: Sequence[SweepCase]) -> list[LemmaRow]:
    return ordered_map(_lemma_row, cases)


def chi_square_pvalue(counts: np.ndarray, probs: np.ndarray, min_expected: float = 5.0) -> float:
    """Pearson goodness of fit; cells with expected count below ``min_expected`` are pooled."""
    counts = np.asarray(counts, dtype=float)
    exp = np.asarray(probs, dtype=float) * counts.sum()
    small = exp < min_expected
    obs_cells = list(counts[~small])
    exp_cells = list(exp[~small])
    if small.any():
        obs_cells.append(counts[small].sum())
        exp_cells.append(exp[small].sum())
    obs_cells, exp_cells = np.array(obs_cells), np.array(exp_cells)
    keep = exp_cells > 0
    if np.any(obs_cells[~keep] > 0):
        return 0.0
    obs_cells, exp_cells = obs_cells[keep], exp_cells[keep]
    if len(obs_cells) < 2:
        return 1.0
    stat = float(np.sum((obs_cells - exp_cells) ** 2 / exp_cells))
    return float(chi2.sf(stat, len(obs_cells) - 1))


@dataclass(frozen=True)
class CouplingRow:
    case_id: int
    vertex: int
    mean: float
    std_error: float
    bound: float
    case2_fraction: float
    p_value: float
    p_value_shifted: float

    @property
    def w1_passed(self) -> bool:
        return self.mean - 3 * self.std_error <= self.bound + 1e-12


def _marginal_pvalue(samples: np.ndarray, inst: HolantInstance) -> float:
    enum = enumerate_instance(inst)
    pow2 = 1 << np.arange(inst.m, dtype=np.int64)
    masks = samples.astype(np.int64) @ pow2
    counts = np.bincount(masks, minlength=1 << inst.m)
    return chi_square_pvalue(counts, enum.distribution())


def _coupling_rows(args: tuple[SweepCase, int, int]) -> list[CouplingRow]:
    case, trials, seed = args
    inst = case.instance
    p_max = compute_params(inst).p_max
    rows = []
    for v in range(inst.n):
        if inst.graph.degree(v) == 0 or inst.sigs[v].at(1) <= 0:
            continue
        batch = coupling.couple_batch(inst, v, trials, split_seed(seed, case.case_id * 64 + v))
        ham = batch.hamming
        se = float(ham.std(ddof=1) / math.sqrt(trials))
        rows.append(CouplingRow(case.case_id, v, float(ham.mean()), se, p_max - 1.0,
                                float(batch.halted_by_case2.mean()),
                                _marginal_pvalue(batch.sigma, inst),
                                _marginal_pvalue(batch.sigma_shifted, shift_vertex(inst, v))))
    return rows


def coupling_sweep(cases: Sequence[SweepCase], trials: int, seed: int) -> list[CouplingRow]:
    """Coupling W1 estimate and marginal goodness of fit for every vertex with ``f_v(1) > 0``."""
    out = ordered_map(_coupling_rows, [(c, trials, seed) for c in cases])
    return [r for rows in out for r in rows]


# --- counterexamples ----------------------------------------------------------

FAMILIES = ("path_mixed_signatures", "path_with_pendants")


@dataclass(frozen=True)
class CounterexampleInstance:
    family: str
    n: int
    instance: HolantInstance
    pinning: Pinning | None = None

    def reduced(self) -> HolantInstance:
        """The instance after applying the family's pinning (if any)."""
        if self.pinning is None:
            return self.instance
        return induced(self.instance, self.pinning)[0]


def _mixed_signature(i: int, n: int, family: str) -> Signature:
    if i == 0 or i == n:
        return Signature((1.0, 1.0))
    if family == "path_mixed_signatures":
        return Signature((1.0, 1.0, 0.0)) if i % 2 == 1 else Signature((0.0, 1.0, 1.0))
    return Signature((0.0, 1.0, 1.0, 0.0))


def build_counterexample(family: str, n: int) -> CounterexampleInstance:
    """Path ``v0..vn`` families where influences grow linearly in ``n``.

    ``path_mixed_signatures``: ``[1,1,0]`` at odd and ``[0,1,1]`` at even
    interior vertices. ``path_with_pendants``: ``[0,1,1,0]`` at interior
    vertices plus pendants ``u_i v_i`` pinned to 1 (odd i) or 0 (even i).
    The path ends ``v0`` and ``vn`` (and pendant leaves) are unconstrained,
    ``[1,1]``; edge ``i`` is ``v_i v_{i+1}``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if family == "path_mixed_signatures":
        g = path_graph(n + 1)
        sigs = tuple(_mixed_signature(i, n, family) for i in range(n + 1))
        inst = HolantInstance(g, sigs, (1.0,) * g.m, strict=False)
        return CounterexampleInstance(family, n, inst)
    if family == "path_with_pendants":
        g = pendant_path_graph(n)
        sigs = [_mixed_signature(i, n, family) for i in range(n + 1)]
        sigs += [Signature((1.0, 1.0))] * (n - 1)
        inst = HolantInstance(g, tuple(sigs), (1.0,) * g.m, strict=False)
        pin = Pinning({n - 1 + i: (1 if i % 2 == 1 else 0) for i in range(1, n)})
        return CounterexampleInstance(family, n, inst, pin)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def feasible_counts(ce: CounterexampleInstance) -> tuple[int, int]:
    """Numbers of feasible configurations with the first path edge at 1 and at 0."""
    inst = ce.reduced()
    w = enumerate_instance(inst).weights
    idx = np.arange(len(w))
    feasible = w > 0
    return int(np.sum(feasible & (idx & 1 == 1))), int(np.sum(feasible & (idx & 1 == 0)))


@dataclass(frozen=True)
class RowSumRow:
    family: str
    n: int
    row_sum: float
    bound: float | None


def row_sum(family: str, n: int) -> RowSumRow:
    """Absolute influence row sum of the first path edge.

    ``b_matching_path`` is the contrast family: 1-matchings of a path with n
    edges, reported with its ``2 (P_max - 1)`` bound.
    """
    if family == "b_matching_path":
        inst = build_b_matching(path_graph(n + 1), 1)
        bound = 2 * (compute_params(inst).p_max - 1)
        return RowSumRow(family, n, influence_matrix(inst).row_abs_sum(0), bound)
    ce = build_counterexample(family, n)
    mat = influence_matrix(ce.instance, ce.pinning)
    return RowSumRow(family, n, mat.row_abs_sum(0), None)


def influence_row_sum_growth(family: str, n_list: Sequence[int]) -> list[RowSumRow]:
    return ordered_map(lambda n: row_sum(family, n), list(n_list))


def doubling_ratios(rows: Sequence[RowSumRow]) -> list[tuple[int, float]]:
    """``row_sum(2n) / row_sum(n)`` for every n whose double is also present."""
    by_n = {r.n: r.row_sum for r in rows}
    return [(n, by_n[2 * n] / by_n[n]) for n in sorted(by_n) if 2 * n in by_n and by_n[n] > 0]


# --- mixing ----------------------------------------------------------------

@njit(cache=True)
def _coalesce(eu, ev, table, lam, cfg_a, occ_a, cfg_b, occ_b, picks, us, offset):
    m = cfg_a.shape[0]
    for i in range(picks.shape[0]):
        glauber._advance(eu, ev, table, lam, cfg_a, occ_a, picks[i:i + 1], us[i:i + 1])
        glauber._advance(eu, ev, table, lam, cfg_b, occ_b, picks[i:i + 1], us[i:i + 1])
        same = True
        for e in range(m):
            if cfg_a[e] != cfg_b[e]:
                same = False
                break
        if same:
            return offset + i + 1
    return -1


def coalescence_time(inst: HolantInstance, seed: int, max_steps: int = 10_000_000) -> int:
    """Steps until chains from the empty and greedy starts, driven by the same
    updates, agree. A heuristic: this identity coupling is not monotone."""
    eu, ev, table, lam = glauber._kernel_args(inst)
    a = glauber.initial_config(inst, "empty")
    b = glauber.initial_config(inst, "greedy")
    if np.array_equal(a, b):
        return 0
    occ_a, occ_b = glauber.occupancy_of(inst, a), glauber.occupancy_of(inst, b)
    rng = stream(seed, 0)
    done = 0
    while done < max_steps:
        k = min(glauber.BLOCK, max_steps - done)
        picks, us = glauber._draw_block(rng, inst.m, k)
        hit = _coalesce(eu, ev, table, lam, a, occ_a, b, occ_b, picks, us, done)
        if hit >= 0:
            return int(hit)
        done += k
    raise RuntimeError(f"no coalescence within {max_steps} steps")


def mixing_instance(family: str, m: int, seed: int, b: int = 1, lam: float = 1.0) -> HolantInstance:
    """``random``: m edges on m vertices with max degree 3; ``path``/``cycle``: m edges."""
    if family == "random":
        g = random_graph(m, 3, split_seed(seed, m), m)
    elif family == "path":
        g = path_graph(m + 1)
    elif family == "cycle":
        g = gen_graph(f"cycle_{m}")
    elif family == "single_edge":
        g = path_graph(2)
    else:
        raise ValueError(f"unknown mixing family {family!r}")
    return build_b_matching(g, b, lam)


@dataclass(frozen=True)
class MixingRow:
    m: int
    steps: int
    method: str          # "exact" or the non-rigorous coalescence heuristic
    fitted: float = 0.0
    residual: float = 0.0

    @property
    def within_twice_fit(self) -> bool:
        return self.steps <= 2 * self.fitted


EXACT_MIXING_CAP = 14


def mixing_steps(inst: HolantInstance, seed: int, threshold: float = 0.1, replicas: int = 8) -> tuple[int, str]:
    """Steps to TV <= threshold, worst of the empty and greedy starts.

    Exact for at most 14 edges; otherwise the mean coalescence time over
    ``replicas`` runs, labelled heuristic.
    """
    if inst.m <= EXACT_MIXING_CAP:
        from .graph import config_to_mask

        starts = {0, config_to_mask(glauber.greedy_config(inst))}
        return max(steps_to_tv(inst, s, threshold) for s in sorted(starts)), "exact"
    times = [coalescence_time(inst, split_seed(seed, r)) for r in range(replicas)]
    return int(round(float(np.mean(times)))), "coalescence-heuristic-nonrigorous"


def fit_m_log_m(ms: Sequence[int], steps: Sequence[float]) -> float:
    """Least-squares ``c`` in ``steps ~ c m log m`` (through the origin)."""
    x = np.array([m * math.log(m) for m in ms], dtype=float)
    y = np.asarray(steps, dtype=float)
    denom = float(x @ x)
    return float(x @ y / denom) if denom > 0 else 0.0


@dataclass(frozen=True)
class MixingProfile:
    rows: tuple[MixingRow, ...]
    c: float
    family: str


def mixing_profile(family: str, sizes: Sequence[int], seed: int, threshold: float = 0.1) -> MixingProfile:
    insts = [mixing_instance(family, m, seed) for m in sizes]
    measured = ordered_map(lambda inst: mixing_steps(inst, seed, threshold), insts)
    ms = [inst.m for inst in insts]
    c = fit_m_log_m([m for m in ms if m > 1], [s for m, (s, _) in zip(ms, measured) if m > 1])
    rows = []
    for m, (s, method) in zip(ms, measured):
        fitted = c * m * math.log(m) if m > 1 else 0.0
        rows.append(MixingRow(m, s, method, fitted, s - fitted))
    return MixingProfile(tuple(rows), c, family)
