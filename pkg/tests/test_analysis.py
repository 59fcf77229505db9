import math

import numpy as np
import pytest

from holant.analysis import (
    build_counterexample,
    chi_square_pvalue,
    coalescence_time,
    doubling_ratios,
    estimate_log_z,
    exact_log_z_telescoped,
    feasible_counts,
    fit_m_log_m,
    influence_row_sum_growth,
    lemma_sweep,
    mixing_instance,
    mixing_profile,
    mixing_steps,
    samples_for,
    si_sweep,
    standard_sweep,
)
from holant.graph import Graph, complete_graph, path_graph
from holant.model import build_b_matching
from holant.oracle import gibbs_distribution, partition_function, total_variation


def test_samples_for_scales_with_p_max():
    assert samples_for(0.05, 3, 1.0, 0.99) == 0
    small = samples_for(0.05, 3, 2.0, 0.99)
    assert samples_for(0.05, 3, 3.0, 0.99) == pytest.approx(2 * small, rel=1e-3)
    assert samples_for(0.05, 6, 2.0, 0.99) == pytest.approx(2 * small, rel=1e-3)


def test_estimate_log_z_k3():
    est = estimate_log_z(build_b_matching(complete_graph(3), 1), 0.05, 1)
    assert 3.8 <= est.z <= 4.2
    assert est.samples_per_marginal > 0


def test_b_zero_needs_no_sampling():
    inst = build_b_matching(complete_graph(4), 0)
    est = estimate_log_z(inst, 0.05, 0)
    assert est.samples_per_marginal == 0 and est.log_z == 0.0


@pytest.mark.parametrize("inst", [
    build_b_matching(complete_graph(4), 2, 1.5),
    build_b_matching(path_graph(6), 1, 0.5),
    build_b_matching(complete_graph(3), 1),
])
def test_telescoping_identity(inst):
    assert exact_log_z_telescoped(inst) == pytest.approx(math.log(partition_function(inst)), abs=1e-10)


def test_si_sweep_small():
    rows = si_sweep({"max_vertices": 4})
    assert len(rows) == 9 * 6
    assert all(r.passed for r in rows)
    disjoint = si_sweep(standard_sweep(graphs=[Graph(4, [(0, 1), (2, 3)])]))
    assert all(r.si_constant == 0 for r in disjoint)
    uniform = si_sweep(standard_sweep(bs=[1], lambdas=[1.0], graphs=[complete_graph(4)]))[0]
    assert uniform.p_max == 4 and uniform.bound == 6 and uniform.passed


def test_lemma_sweep_small():
    rows = lemma_sweep(standard_sweep(max_vertices=4))
    assert all(r.all_zero_passed and r.marginal_passed and r.monotone_passed for r in rows)


@pytest.mark.parametrize("family", ["path_mixed_signatures", "path_with_pendants"])
def test_counterexample_counts(family):
    for n in (4, 5, 6):
        assert feasible_counts(build_counterexample(family, n)) == (1, n)


def test_family_two_reduces_to_family_one():
    two = build_counterexample("path_with_pendants", 4).reduced()
    one = build_counterexample("path_mixed_signatures", 4).instance
    assert two.m == one.m
    assert total_variation(gibbs_distribution(two), gibbs_distribution(one)) == 0


def test_row_sum_growth_and_contrast():
    rows = influence_row_sum_growth("path_mixed_signatures", [4, 8, 12])
    sums = [r.row_sum for r in rows]
    assert sums[0] < sums[1] < sums[2]
    assert dict(doubling_ratios(rows))[4] >= 1.8
    contrast = influence_row_sum_growth("b_matching_path", [4, 8, 12])
    assert all(r.row_sum < r.bound for r in contrast)
    assert max(r.row_sum for r in contrast) - min(r.row_sum for r in contrast) < 0.05


def test_mixing_small_cases():
    steps, method = mixing_steps(mixing_instance("single_edge", 1, 0), 0)
    assert method == "exact" and steps < 10
    prof = mixing_profile("random", [6, 8, 10], 3)
    assert all(r.within_twice_fit for r in prof.rows)
    assert prof.c == pytest.approx(fit_m_log_m([r.m for r in prof.rows], [r.steps for r in prof.rows]))


def test_tiny_lambda_concentrates_at_empty():
    inst = mixing_instance("random", 10, 1, lam=1e-6)
    assert gibbs_distribution(inst)[0] > 1 - 1e-4
    steps, _ = mixing_steps(inst, 0)
    assert steps <= 3 * 10 * math.log(10)


def test_coalescence_heuristic_runs():
    inst = mixing_instance("random", 40, 2)
    assert coalescence_time(inst, 5) == coalescence_time(inst, 5) > 0
    steps, method = mixing_steps(inst, 5)
    assert "nonrigorous" in method


def test_chi_square_pooling():
    assert chi_square_pvalue(np.array([50, 50]), np.array([0.5, 0.5])) == pytest.approx(1.0)
    assert chi_square_pvalue(np.array([0, 10]), np.array([0.0, 1.0])) == 1.0
    assert chi_square_pvalue(np.array([1, 9]), np.array([0.0, 1.0])) == 0.0
