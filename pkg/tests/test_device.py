from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynmed import device
from dynmed.device import ACCEPT_EFFORT, ACCEPT_SHIRK, REJECT_SHIRK, PolicyStep, Recommendation
from dynmed.errors import DomainError, SlopeSignError
from dynmed.model import derive

from .conftest import make


def test_recommendation_rejects_reject_effort():
    with pytest.raises(ValueError):
        Recommendation("reject", "effort")


def test_high_secret_example(dq):
    st_ = device.policy_at(dq, 1.2)
    assert st_.region_tag == device.HIGH_SECRET
    assert st_.mu_e == pytest.approx(8 / 10.5, abs=1e-12)
    assert st_.next_utility(ACCEPT_SHIRK, "g") == 1.2 == st_.next_utility(ACCEPT_SHIRK, "b")
    assert st_.next_utility(ACCEPT_EFFORT, "g") == 1.25
    assert st_.next_utility(ACCEPT_EFFORT, "b") == pytest.approx(1.02778, abs=1e-5)


def test_effort_example(dq):
    st_ = device.policy_at(dq, 0.8)
    assert st_.region_tag == device.EFFORT_REGION
    assert st_.mixture == {ACCEPT_EFFORT: 1.0}
    ug, ub = st_.next_utility(ACCEPT_EFFORT, "g"), st_.next_utility(ACCEPT_EFFORT, "b")
    assert ug == pytest.approx(0.83333, abs=1e-5)
    assert ub == pytest.approx(0.61111, abs=1e-5)
    assert ug - 0.8 == pytest.approx(0.03333, abs=1e-5)
    assert ub - 0.8 == pytest.approx(-0.18889, abs=1e-5)


def test_zero_rejects_forever(dq):
    st_ = device.policy_at(dq, 0.0)
    assert st_.mixture == {REJECT_SHIRK: 1.0}
    assert st_.next_utility(REJECT_SHIRK, "0") == 0.0
    assert st_.region_tag == device.ABSORBING


def test_region_boundaries(dq, dq_high):
    assert device.policy_at(dq, dq.U_R).region_tag == device.EFFORT_REGION
    assert device.policy_at(dq, dq.U_I).region_tag == device.ABSORBING
    assert device.policy_at(dq_high, dq_high.U_I).region_tag == device.RATIONED
    assert device.policy_at(dq_high, 0.0).region_tag == device.ABSORBING
    with pytest.raises(DomainError):
        device.policy_at(dq, 1.26)


def test_obedience_examples(dq):
    ok = device.check_obedience(dq, device.policy_at(dq, 0.8))
    assert ok.passed and "a" in ok.binding

    bad = PolicyStep(U=0.8, mixture={ACCEPT_EFFORT: 1.0},
                     continuations={(ACCEPT_EFFORT, "g"): 0.8, (ACCEPT_EFFORT, "b"): 0.8 - dq.x_delta / 2},
                     region_tag=device.EFFORT_REGION)
    rep = device.check_obedience(dq, bad)
    assert not rep.passed and rep.violated == ("a",)

    top = device.check_obedience(dq, device.policy_at(dq, dq.U_bar))
    assert top.passed and "c" in top.binding
    assert top.details["conditional_effort"] == pytest.approx(dq.alpha_lo, abs=1e-12)


def test_obedience_flags_client_and_shape(dq):
    too_much_shirk = PolicyStep(
        U=1.0, mixture={ACCEPT_EFFORT: 0.3, ACCEPT_SHIRK: 0.7},
        continuations={(ACCEPT_EFFORT, "g"): 1.2, (ACCEPT_EFFORT, "b"): 1.2 - dq.x_delta,
                       (ACCEPT_SHIRK, "g"): 1.0, (ACCEPT_SHIRK, "b"): 1.0},
        region_tag=device.HIGH_SECRET)
    assert device.check_obedience(dq, too_much_shirk).violated == ("c",)
    wide_shirk = PolicyStep(
        U=1.0, mixture={ACCEPT_EFFORT: 0.7, ACCEPT_SHIRK: 0.3},
        continuations={(ACCEPT_EFFORT, "g"): 1.2, (ACCEPT_EFFORT, "b"): 1.2 - dq.x_delta,
                       (ACCEPT_SHIRK, "g"): 1.2, (ACCEPT_SHIRK, "b"): 0.8},
        region_tag=device.HIGH_SECRET)
    assert "b" in device.check_obedience(dq, wide_shirk).violated
    off = PolicyStep(U=0.5, mixture={ACCEPT_EFFORT: 0.6}, continuations={}, region_tag="Effort")
    assert "well_formed" in device.check_obedience(dq, off).violated


def _check_step(dq, U):
    st_ = device.policy_at(dq, U)
    assert device.check_obedience(dq, st_).passed
    assert abs(device.promise_value(dq, st_) - st_.U) <= 1e-12 * max(1.0, dq.U_bar)
    assert abs(sum(st_.mixture.values()) - 1) < 1e-15
    for v in st_.continuations.values():
        assert 0 <= v <= dq.U_bar
    if st_.mu_e > 0:
        gap = st_.next_utility(ACCEPT_EFFORT, "g") - st_.next_utility(ACCEPT_EFFORT, "b")
        assert abs(gap - dq.x_delta) < 1e-12
    return st_


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1.25))
def test_device_sound_canonical(dq, U):
    st_ = _check_step(dq, U)
    if U <= dq.U_I:
        assert all(v <= dq.U_I * (1 + 1e-12) for v in st_.continuations.values())


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1.5))
def test_device_sound_high_cost(dq_high, U):
    st_ = _check_step(dq_high, U)
    if U < dq_high.U_I:
        assert set(st_.continuations.values()) <= {dq_high.x_delta, 0.0}


@settings(max_examples=40, deadline=None)
@given(st.floats(0.62, 0.99), st.floats(0.6, 0.9), st.floats(0.3, 2.0), st.floats(0, 1))
def test_device_sound_random_params(delta, p, r, t):
    dq = derive(make(delta=delta, p=p, q=1 - p, r=r))
    if dq.mediation_nontrivial:
        _check_step(dq, t * dq.U_bar)


def test_alpha_decreasing_on_top(dq):
    Us = np.linspace(dq.U_R, dq.U_bar, 200)[1:]
    alphas = [device.policy_at(dq, u).mu_e for u in Us]
    assert np.all(np.diff(alphas) < 0)
    assert alphas[-1] == pytest.approx(dq.alpha_lo, abs=1e-12)


def test_beta_bar_formula():
    assert device.beta_bar_from_slope(-1.0) == 0.5
    assert device.beta_bar_from_slope(-0.25) == pytest.approx(0.2)
    with pytest.raises(SlopeSignError):
        device.beta_bar_from_slope(0.0)


def test_beta_bar_canonical(dq, F):
    bb = device.compute_beta_bar(dq, F)
    assert 0 < bb < 1
    obj = lambda U: bb * U + (1 - bb) * F(U)  # noqa: E731
    for U in np.linspace(dq.U_R, dq.U_bar, 7):
        assert obj(U) == pytest.approx(obj(dq.U_R), abs=1e-8)


def test_initial_utility(dq, F):
    bb = device.compute_beta_bar(dq, F)
    assert device.initial_utility(dq, F, 0.0) == dq.U_R
    assert device.initial_utility(dq, F, 1.0) == dq.U_bar
    assert device.initial_utility(dq, F, bb) == dq.U_R


def test_policy_table_csv(dq, F, tmp_path):
    rows = device.policy_table(dq, F.nodes[::100])
    path = tmp_path / "policy.csv"
    device.write_policy_csv(path, rows)
    with open(path) as fh:
        data = list(csv.DictReader(fh))
    assert list(data[0]) == list(device.POLICY_COLUMNS)
    assert len(data) == len(rows)
    assert {r["region"] for r in data} == {"Absorbing", "Effort", "HighSecret"}

