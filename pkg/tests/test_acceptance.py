"""Acceptance criteria 1-11, one test each; every test prints a PASS/FAIL line."""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from holant import analysis
from holant.graph import Graph, complete_graph, path_graph, random_graph
from holant.model import HolantInstance, build_b_edge_cover, build_b_matching
from holant.oracle import (
    detailed_balance_error,
    glauber_transition,
    partition_function,
    stationarity_error,
)
from holant.rng import stream
from holant.signatures import Signature, compute_params, p_max_upper_bound


@pytest.fixture(scope="module")
def sweep():
    return analysis.standard_sweep()


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def _goldens():
    cover, _ = build_b_edge_cover(complete_graph(3), 1)
    return {
        "K3 b=1": (build_b_matching(complete_graph(3), 1), 4),
        "path3 b=1": (build_b_matching(path_graph(4), 1), 5),
        "K3 b=2": (build_b_matching(complete_graph(3), 2), 8),
        "K3 edge covers": (cover, 4),
    }


def test_c01_exact_count_goldens(report):
    got = {name: partition_function(inst) for name, (inst, _) in _goldens().items()}
    ok = all(got[name] == want for name, (_, want) in _goldens().items())
    report(1, ok, "Z = " + ", ".join(f"{k}: {v:g}" for k, v in got.items()))


def test_c02_stationarity_reversibility(report, sweep):
    worst_s = worst_d = 0.0
    count = 0
    for case in sweep:
        if case.graph.m > 10:
            continue
        op = glauber_transition(case.instance)
        worst_s = max(worst_s, stationarity_error(op))
        worst_d = max(worst_d, detailed_balance_error(op))
        count += 1
    ok = worst_s <= 1e-12 and worst_d <= 1e-12
    report(2, ok, f"{count} instances, max |piP - pi| = {worst_s:.2e}, max balance error = {worst_d:.2e}")


def test_c03_spectral_independence(report, sweep):
    t0 = time.perf_counter()
    rows = analysis.si_sweep(sweep)
    elapsed = time.perf_counter() - t0
    bad = [r for r in rows if not r.passed]
    pinnings = sum(r.feasible_pinnings for r in rows)
    worst = max(r.si_constant / r.bound for r in rows if r.bound > 0)
    ok = not bad and elapsed < 120
    report(3, ok, f"{len(rows)} cases, {pinnings} pinnings, {len(bad)} violations, "
                  f"max ratio to bound {worst:.3f}, {elapsed:.1f}s")


def test_c04_coupling_bound(report, sweep):
    rows = analysis.coupling_sweep(sweep, 10_000, 20241015)
    tests = 2 * len(rows)
    alpha = 1e-3 / tests  # family-wise 1e-3 across every marginal test
    w1_bad = [r for r in rows if not r.w1_passed]
    p_min = min(min(r.p_value, r.p_value_shifted) for r in rows)
    below = sum((r.p_value < 1e-3) + (r.p_value_shifted < 1e-3) for r in rows)
    ok = not w1_bad and p_min > alpha
    report(4, ok, f"{len(rows)} (case, vertex) pairs, {len(w1_bad)} W1 violations, "
                  f"min chi-square p = {p_min:.2e} vs family-wise {alpha:.1e} "
                  f"({below} of {tests} below 1e-3, {tests * 1e-3:.1f} expected)")


def test_c05_lemma_bounds(report, sweep):
    rows = analysis.lemma_sweep(sweep)
    ok = all(r.all_zero_passed and r.marginal_passed for r in rows)
    checks = sum(r.checks for r in rows)
    slack = min(r.worst_all_zero_slack for r in rows)
    report(5, ok, f"{checks} exact bound checks, min all-zero slack {slack:.3g}")


def test_c06_monotonicity(report, sweep):
    from holant.oracle import check_monotonicity

    total = dominated = 0
    passed = True
    for case in sweep:
        inst = case.instance
        for v in range(inst.n):
            if inst.sigs[v].at(1) <= 0:
                continue
            res = check_monotonicity(inst, v)
            total += 1
            dominated += res.dominating_edge is not None
            passed &= res.passed
    ok = passed and dominated == total
    report(6, ok, f"{total} (case, vertex) pairs, dominating edge found in {dominated}")


def _random_instance(rng: np.random.Generator, index: int) -> HolantInstance:
    n = int(rng.integers(2, 9))
    g = random_graph(n, int(rng.integers(1, 5)), index)
    sigs = []
    for v in range(n):
        d = g.degree(v)
        top = int(rng.integers(0, d + 1))
        incs = np.sort(rng.uniform(-2, 1, size=top))[::-1]
        logs = rng.uniform(-1, 1) + np.concatenate([[0.0], np.cumsum(incs)])
        vals = list(np.exp(logs)) + [0.0] * (d - top)
        sigs.append(Signature(tuple(float(x) for x in vals)))
    lams = tuple(float(x) for x in np.exp(rng.uniform(-1.5, 1.5, size=g.m)))
    return HolantInstance(g, tuple(sigs), lams)


def test_c07_p_max_bound(report):
    rng = stream(7, 0)
    worst = 0.0
    count = 0
    for i in range(10_000):
        inst = _random_instance(rng, i)
        if inst.m == 0:
            continue
        p = compute_params(inst)
        worst = max(worst, p.p_max / p_max_upper_bound(p))
        count += 1
    ok = worst <= 1 + 1e-9
    report(7, ok, f"{count} random instances, max p_max / (r_max^2 lambda_max + 1)^Delta = {worst:.6f}")


def test_c08_counting(report):
    parts = []
    ok = True
    for i, (name, (inst, z)) in enumerate(_goldens().items()):
        est = analysis.estimate_log_z(inst, 0.05, 1000 + i, confidence=0.99)
        rel = abs(est.z / z - 1)
        ok &= rel <= 0.05
        parts.append(f"{name}: {est.z:.4f} (rel {rel:.4f}, N={est.samples_per_marginal})")
    report(8, ok, "; ".join(parts))


def test_c09_counterexample(report):
    counts_ok = all(analysis.feasible_counts(analysis.build_counterexample("path_mixed_signatures", n)) == (1, n)
                    for n in range(2, 13))
    rows = analysis.influence_row_sum_growth("path_mixed_signatures", [4, 6, 8, 12])
    ratios = dict(analysis.doubling_ratios(rows))
    growth_ok = ratios[4] >= 1.8 and ratios[6] >= 1.8
    sums = [r.row_sum for r in rows]
    monotone = all(a < b for a, b in zip(sums, sums[1:]))
    contrast = analysis.influence_row_sum_growth("b_matching_path", [2, 4, 6, 8, 12])
    contrast_ok = all(r.row_sum < r.bound for r in contrast)
    ok = counts_ok and growth_ok and monotone and contrast_ok
    report(9, ok, f"counts (1, n) for n=2..12: {counts_ok}; ratios 4->8 {ratios[4]:.3f}, "
                  f"6->12 {ratios[6]:.3f}; contrast max row sum "
                  f"{max(r.row_sum for r in contrast):.3f} < {contrast[0].bound:g}")


def test_c10_mixing(report):
    prof = analysis.mixing_profile("random", [6, 8, 10, 12, 14], 0)
    ok = all(r.method == "exact" and r.within_twice_fit for r in prof.rows)
    cells = ", ".join(f"m={r.m}: {r.steps} (resid {r.residual:+.1f})" for r in prof.rows)
    report(10, ok, f"c = {prof.c:.3f}; {cells}")


def _cli_runs(workdir, threads: int) -> dict[str, bytes]:
    env = {**os.environ, "HOLANT_THREADS": str(threads)}
    cmds = {
        "sample": ["sample", "--config", "k3.json", "--samples", "50", "--steps", "200", "--seed", "4"],
        "count": ["count", "--config", "k3.json", "--eps", "0.1", "--seed", "4"],
        "verify-si": ["verify-si", "--sweep", "tiny.json", "--plot", f"si{threads}.png"],
        "couple-w1": ["couple-w1", "--config", "k3.json", "--vertex", "1", "--trials", "5000", "--seed", "4"],
        "mix-diag": ["mix-diag", "--sizes", "6,8,10", "--seed", "4", "--plot", f"mix{threads}.png"],
        "counterexample": ["counterexample", "--family", "path_with_pendants", "--n", "4,6,8,12",
                           "--plot", f"ce{threads}.png"],
        "oracle": ["oracle", "--config", "k3.json", "--all-pinnings"],
    }
    out = {}
    for name, args in cmds.items():
        proc = subprocess.run([sys.executable, "-m", "holant", *args], cwd=workdir, env=env,
                              capture_output=True, check=True)
        out[name] = proc.stdout
    for stem in ("si", "mix", "ce"):
        out[stem + ".png"] = (workdir / f"{stem}{threads}.png").read_bytes()
    return out


def test_c11_determinism(report, tmp_path):
    (tmp_path / "k3.txt").write_text("3 3\n0 1\n1 2\n0 2\n")
    (tmp_path / "k3.json").write_text(json.dumps({"graph": "k3.txt", "model": "b_matching", "b": 1}))
    (tmp_path / "tiny.json").write_text(json.dumps({"max_vertices": 4}))
    first = _cli_runs(tmp_path, 1)
    second = _cli_runs(tmp_path, 1)
    wide = _cli_runs(tmp_path, 4)
    differing = sorted(k for k in first if not (first[k] == second[k] == wide[k]))
    ok = not differing
    report(11, ok, f"{len(first)} outputs compared across 2 runs and HOLANT_THREADS 1/4; "
                   f"differing: {differing or 'none'}")
