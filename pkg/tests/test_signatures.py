import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holant.graph import Graph, Pinning, complete_graph
from holant.model import HolantInstance, InfeasiblePinning, build_b_matching, induced
from holant.signatures import (
    InternalZero,
    NegativeEntry,
    NotLogConcave,
    Signature,
    compute_params,
    gen_poly_eval,
    p_max_upper_bound,
    remark_b_matching_bound,
    shift_down,
    validate,
)

from conftest import log_concave_values, small_instances


def test_validate_examples():
    assert validate([1, 1, 1, 0, 0]).values == (1, 1, 1, 0, 0)
    with pytest.raises(InternalZero) as exc:
        validate([1, 0, 1])
    assert exc.value.index == 1
    with pytest.raises(NotLogConcave) as exc:
        validate([1, 1, 3])
    assert exc.value.index == 1
    with pytest.raises(NegativeEntry):
        validate([1, -1])


def test_shift_down_examples():
    assert shift_down(Signature((1, 1, 0)), 1).values == (1, 0)
    assert shift_down(Signature((1, 1, 0)), 0).values == (1, 1, 0)
    assert shift_down(Signature((2, 4, 4, 1)), 2).values == (4, 1)


def test_gen_poly_examples():
    assert gen_poly_eval(Signature((1, 1, 0)), 1) == 3
    assert gen_poly_eval(Signature((1, 1)), 2) == 3
    assert gen_poly_eval(Signature((5, 2, 1)), 0) == 1


def test_compute_params_examples(k3):
    p = compute_params(k3)
    assert (p.r_max, p.r_min, p.lambda_max, p.lambda_min, p.p_max, p.delta) == (1, 1, 1, 1, 3, 2)
    edge = HolantInstance(Graph(2, [(0, 1)]), (Signature((1, 1)),) * 2, (2.0,))
    assert compute_params(edge).r_max == 1 and compute_params(edge).p_max == 3
    b0 = build_b_matching(complete_graph(3), 0)
    assert compute_params(b0).r_max == 0 and compute_params(b0).p_max == 1


def test_p_max_bound_examples(k3):
    assert p_max_upper_bound(compute_params(k3)) == 4 >= compute_params(k3).p_max
    b0 = build_b_matching(complete_graph(3), 0)
    assert p_max_upper_bound(compute_params(b0)) == 1
    assert remark_b_matching_bound(3, 1) == 4
    assert (1 + 1) ** 3 >= remark_b_matching_bound(3, 1)


@settings(max_examples=300)
@given(log_concave_values(leading_zeros=True), st.data())
def test_shift_closure(vals, data):
    f = validate(vals)
    m = data.draw(st.integers(0, f.d))
    validate(shift_down(f, m).values)


@settings(max_examples=300)
@given(log_concave_values())
def test_ratio_monotonicity(vals):
    f = validate(vals)
    d = f.d
    for k in range(d + 1):
        for ell in range(d - k + 1):
            if f.values[ell] <= 0:
                continue
            lhs = f.values[k] / f.values[0]
            rhs = f.values[k + ell] / f.values[ell]
            assert lhs >= rhs * (1 - 1e-9)


@settings(max_examples=300)
@given(log_concave_values(), st.floats(0, 10), st.floats(0, 10))
def test_gen_poly_monotone(vals, x, y):
    f = validate(vals)
    lo, hi = sorted((x, y))
    assert gen_poly_eval(f, lo) <= gen_poly_eval(f, hi) * (1 + 1e-12)


@settings(max_examples=150, deadline=None)
@given(small_instances(), st.data())
def test_params_monotone_under_pinning(inst, data):
    e = data.draw(st.integers(0, inst.m - 1))
    val = data.draw(st.integers(0, 1))
    try:
        sub, _ = induced(inst, Pinning({e: val}))
    except InfeasiblePinning:
        return
    if sub.m == 0 or any(s.values[0] <= 0 for s in sub.sigs):
        return
    a, b = compute_params(inst), compute_params(sub)
    tol = 1 + 1e-12
    assert b.r_max <= a.r_max * tol
    assert b.lambda_max <= a.lambda_max
    assert b.p_max <= a.p_max * tol
    assert b.delta <= a.delta
    assert b.lambda_min >= a.lambda_min
    # r_min falls back to r_max when a pinned instance has no occupiable ratio
    if any(s.at(1) > 0 and s.at(2) > 0 for s in sub.sigs):
        assert b.r_min * tol >= a.r_min


@settings(max_examples=200, deadline=None)
@given(small_instances())
def test_p_max_upper_bound_property(inst):
    p = compute_params(inst)
    assert p.p_max <= p_max_upper_bound(p) * (1 + 1e-9)
    assert math.isfinite(p.p_max) and p.p_max >= 1
