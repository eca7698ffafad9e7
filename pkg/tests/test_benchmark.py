from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynmed.benchmark import NORMAL, PUNISH, build_automaton, ppe_payoff_set, upper_boundary_G
from dynmed.errors import DomainError, RegimeError
from dynmed.model import derive
from dynmed.welfare import feasible_ir_polygon

from .conftest import make


def test_ppe_set_canonical(dq):
    ppe = ppe_payoff_set(dq)
    assert not ppe.degenerate
    assert ppe.worker_interval == (0.0, 0.5)
    assert set(ppe.vertices) == {(0.0, 0.0), (0.5, 0.0), (0.5, 0.25)}
    assert ppe.pareto_optimal == (0.5, 0.25)


def test_ppe_set_degenerate():
    dq = derive(make(delta=0.65))
    assert abs(dq.x_delta - 0.35 / 0.325) < 1e-12
    ppe = ppe_payoff_set(dq)
    assert ppe.degenerate and ppe.vertices == ((0.0, 0.0),)


def test_knife_edge_is_nondegenerate():
    # w - c = x_delta exactly at delta = 0.8
    dq = derive(make(delta=0.8))
    assert abs(dq.net_wage - dq.x_delta) < 1e-12
    assert not ppe_payoff_set(dq).degenerate
    assert abs(build_automaton(dq).gamma - 1.0) < 1e-12


def test_upper_boundary(dq):
    assert upper_boundary_G(dq, 0.0) == 0.0
    assert upper_boundary_G(dq, 0.5) == 0.25
    assert abs(upper_boundary_G(dq, 0.3) - 0.15) < 1e-15
    with pytest.raises(DomainError):
        upper_boundary_G(dq, 0.6)
    with pytest.raises(DomainError):
        upper_boundary_G(derive(make(delta=0.65)), 0.1)


def test_pure_automaton(dq):
    a = build_automaton(dq, "pure")
    assert abs(a.gamma - 4 / 9) < 1e-15
    assert abs(a.W_N - 0.5) < 1e-15
    assert a.payoffs[0] == pytest.approx(0.5, abs=1e-15)
    assert a.payoffs[1] == pytest.approx(0.25, abs=1e-15)
    assert a.continuation_values[PUNISH] == (0.0, 0.0)
    assert a.action_profile_per_state[NORMAL] == ("accept", "effort")
    d, prm = dq.params.delta, dq.params
    assert abs(d * a.gamma * (prm.p - prm.q) * a.W_N - (1 - d) * prm.r) < 1e-12


def test_mixed_automaton(dq):
    a = build_automaton(dq, "mixed")
    assert a.effort_prob_in_N == 0.5
    assert a.payoffs == pytest.approx((0.5, 0.0), abs=1e-15)
    assert a.continuation_values[NORMAL][1] == 0.0


def test_automaton_errors(dq):
    with pytest.raises(RegimeError):
        build_automaton(derive(make(delta=0.65)))
    with pytest.raises(ValueError):
        build_automaton(dq, "grim")


def test_automaton_json(dq):
    data = json.loads(json.dumps(build_automaton(dq).to_dict()))
    assert data["states"] == ["N", "P"]
    assert data["W_N"] == 0.5


def _inside(poly, pt, tol=1e-12):
    n = len(poly)
    signs = []
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        signs.append((x2 - x1) * (pt[1] - y1) - (y2 - y1) * (pt[0] - x1))
    return all(s >= -tol for s in signs) or all(s <= tol for s in signs)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.6, 0.99), st.floats(0.6, 0.9), st.floats(0.3, 2.0))
def test_benchmark_properties(delta, p, r):
    prm = make(delta=delta, p=p, q=1 - p, r=r)
    dq = derive(prm)
    ppe = ppe_payoff_set(dq)
    poly = feasible_ir_polygon(prm)
    for v in ppe.vertices:
        assert _inside(poly, v)
    if ppe.degenerate:
        return
    a = build_automaton(dq)
    assert 0 < a.gamma <= 1
    assert abs(a.W_N - dq.net_wage) < 1e-12
    # discounted frequency of N equals (w - c) / w
    assert abs(a.W_N / prm.w - dq.net_wage / prm.w) < 1e-12
    if a.gamma < 1:
        assert abs(delta * a.gamma * (p - (1 - p)) * a.W_N - (1 - delta) * r) < 1e-12
