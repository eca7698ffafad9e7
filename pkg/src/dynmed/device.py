"""The optimal communication device as a state machine on promised utility."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bellman import ValueFunction, alpha_of
from .errors import DegenerateError, DomainError, SlopeSignError
from .model import (
    ACCEPT,
    BAD,
    EFFORT,
    GOOD,
    NONE,
    REJECT,
    SHIRK,
    DerivedQuantities,
    Regime,
    output_distribution,
    stage_payoffs,
)

HIGH_SECRET = "HighSecret"
EFFORT_REGION = "Effort"
RATIONED = "Rationed"
ABSORBING = "Absorbing"

# slack for closed-form comparisons that are equalities in exact arithmetic
CHECK_TOL = 1e-12


@dataclass(frozen=True, order=True)
class Recommendation:
    client: str
    worker: str

    def __post_init__(self):
        if self.client not in (ACCEPT, REJECT) or self.worker not in (EFFORT, SHIRK):
            raise ValueError(f"bad recommendation ({self.client}, {self.worker})")
        if self.client == REJECT and self.worker == EFFORT:
            raise ValueError("(reject, effort) is never recommended")

    @property
    def code(self) -> str:
        return {EFFORT: "AE", SHIRK: "AS"}[self.worker] if self.client == ACCEPT else "R"


ACCEPT_EFFORT = Recommendation(ACCEPT, EFFORT)
ACCEPT_SHIRK = Recommendation(ACCEPT, SHIRK)
REJECT_SHIRK = Recommendation(REJECT, SHIRK)


@dataclass(frozen=True)
class PolicyStep:
    """One period of the device at promised utility ``U``.

    ``continuations`` maps (recommendation, output) to the next promise;
    recommendations with zero probability are omitted.
    """

    U: float
    mixture: dict[Recommendation, float]
    continuations: dict[tuple[Recommendation, str], float]
    region_tag: str
    delta: float = field(repr=False, default=0.0)

    def prob(self, rec: Recommendation) -> float:
        return self.mixture.get(rec, 0.0)

    @property
    def mu_e(self) -> float:
        return self.prob(ACCEPT_EFFORT)

    @property
    def mu_s(self) -> float:
        return self.prob(ACCEPT_SHIRK)

    @property
    def mu_o(self) -> float:
        return self.prob(REJECT_SHIRK)

    def next_utility(self, rec: Recommendation, output: str) -> float:
        return self.continuations[(rec, output)]


def region_of(dq: DerivedQuantities, U: float) -> str:
    if U > dq.U_R:
        return HIGH_SECRET
    if U > dq.U_I:
        return EFFORT_REGION
    if dq.regime is Regime.LOW_COST or U == 0.0:
        return ABSORBING
    return RATIONED


def policy_at(dq: DerivedQuantities, U: float) -> PolicyStep:
    """Canonical optimal device step at promise ``U``.

    On [0, U^P) effort is recommended with probability U/U^P and rejection
    otherwise, with promises x_delta after a good output and 0 after a bad
    output or a rejection. On [U^P, U^R] effort is recommended for sure. On
    (U^R, U_bar] effort and shirking are mixed secretly; a shirk
    recommendation leaves the promise at ``U``.
    """
    if not dq.mediation_nontrivial:
        raise DegenerateError("mediated payoff set is degenerate")
    if not (-CHECK_TOL <= U <= dq.U_bar * (1 + CHECK_TOL)) or math.isnan(U):
        raise DomainError(f"U={U} outside [0, {dq.U_bar}]")
    U = min(max(float(U), 0.0), dq.U_bar)
    d = dq.params.delta
    x = dq.x_delta
    tag = region_of(dq, U)

    if U > dq.U_R:
        a = alpha_of(dq, U)
        mixture = {ACCEPT_EFFORT: a, ACCEPT_SHIRK: 1.0 - a}
        conts = {
            (ACCEPT_EFFORT, GOOD): dq.U_bar,
            (ACCEPT_EFFORT, BAD): dq.U_bar - x,
            (ACCEPT_SHIRK, GOOD): U,
            (ACCEPT_SHIRK, BAD): U,
        }
    elif U >= dq.U_P:
        ug = min((U - (1 - d) * dq.net_wage) / d, dq.U_bar)
        mixture = {ACCEPT_EFFORT: 1.0}
        conts = {(ACCEPT_EFFORT, GOOD): ug, (ACCEPT_EFFORT, BAD): max(ug - x, 0.0)}
    else:
        m = U / dq.U_P
        mixture = {ACCEPT_EFFORT: m, REJECT_SHIRK: 1.0 - m}
        conts = {(ACCEPT_EFFORT, GOOD): x, (ACCEPT_EFFORT, BAD): 0.0, (REJECT_SHIRK, NONE): 0.0}
        if m == 0.0:
            mixture = {REJECT_SHIRK: 1.0}
            conts = {(REJECT_SHIRK, NONE): 0.0}
    return PolicyStep(U=U, mixture=mixture, continuations=conts, region_tag=tag, delta=d)


def promise_value(dq: DerivedQuantities, step: PolicyStep) -> float:
    """Worker's expected payoff from ``step``: stage payoff plus discounted promise."""
    prm = dq.params
    d = prm.delta
    total = 0.0
    for rec, prob in step.mixture.items():
        if prob == 0.0:
            continue
        u, _ = stage_payoffs(prm, rec.client, rec.worker)
        dist = output_distribution(prm, rec.client, rec.worker)
        cont = sum(pz * step.continuations[(rec, z)] for z, pz in dist.items() if pz > 0)
        total += prob * ((1 - d) * u + d * cont)
    return total


def client_value(dq: DerivedQuantities, step: PolicyStep, F: ValueFunction) -> float:
    """Average client's value of ``step`` using ``F`` for continuation values."""
    prm = dq.params
    d = prm.delta
    total = 0.0
    for rec, prob in step.mixture.items():
        if prob == 0.0:
            continue
        _, v = stage_payoffs(prm, rec.client, rec.worker)
        dist = output_distribution(prm, rec.client, rec.worker)
        cont = sum(pz * F(step.continuations[(rec, z)]) for z, pz in dist.items() if pz > 0)
        total += prob * ((1 - d) * v + d * cont)
    return total


@dataclass(frozen=True)
class ObedienceReport:
    passed: bool
    violated: tuple[str, ...]
    binding: tuple[str, ...]
    details: dict[str, float]


def check_obedience(dq: DerivedQuantities, step: PolicyStep) -> ObedienceReport:
    """Check the step against the obedience constraints.

    (a) after an effort recommendation the good/bad promise gap is at least
    x_delta; (b) after a shirk recommendation the gap is at most x_delta;
    (c) conditional on acceptance, effort has probability at least
    alpha_lo. Structural checks (probabilities, promise range, no
    (reject, effort)) are reported as ``well_formed``.
    """
    x = dq.x_delta
    tol = CHECK_TOL * max(1.0, dq.U_bar)
    violated: list[str] = []
    binding: list[str] = []
    details: dict[str, float] = {}

    probs = list(step.mixture.values())
    ok = all(pr >= -CHECK_TOL for pr in probs) and abs(sum(probs) - 1.0) <= 1e-12
    ok &= all(-tol <= v <= dq.U_bar + tol for v in step.continuations.values())
    if ok and step.prob(ACCEPT_SHIRK) > 0:
        ok = (ACCEPT_SHIRK, GOOD) in step.continuations and (ACCEPT_SHIRK, BAD) in step.continuations
    if ok and step.mu_e > 0:
        ok = (ACCEPT_EFFORT, GOOD) in step.continuations and (ACCEPT_EFFORT, BAD) in step.continuations
    if not ok:
        violated.append("well_formed")

    if step.mu_e > 0 and "well_formed" not in violated:
        gap = step.continuations[(ACCEPT_EFFORT, GOOD)] - step.continuations[(ACCEPT_EFFORT, BAD)]
        details["effort_gap"] = gap
        if gap < x - tol:
            violated.append("a")
        elif gap <= x + tol:
            binding.append("a")
    if step.mu_s > 0 and "well_formed" not in violated:
        gap = step.continuations[(ACCEPT_SHIRK, GOOD)] - step.continuations[(ACCEPT_SHIRK, BAD)]
        details["shirk_gap"] = gap
        if gap > x + tol:
            violated.append("b")
        elif gap >= x - tol:
            binding.append("b")
    accept_mass = step.mu_e + step.mu_s
    if accept_mass > 0:
        cond = step.mu_e / accept_mass
        details["conditional_effort"] = cond
        if cond < dq.alpha_lo - CHECK_TOL:
            violated.append("c")
        elif cond <= dq.alpha_lo + CHECK_TOL:
            binding.append("c")
    return ObedienceReport(not violated, tuple(violated), tuple(binding), details)


def compute_beta_bar(dq: DerivedQuantities, F: ValueFunction) -> float:
    """Worker weight at which the firm is indifferent between starting at U^R and U_bar.

    F is affine on [U^R, U_bar] with slope s < 0, so beta U + (1-beta) F(U)
    is constant there exactly when beta = -s / (1 - s).
    """
    s = (F(dq.U_bar) - F(dq.U_R)) / (dq.U_bar - dq.U_R)
    return beta_bar_from_slope(s)


def beta_bar_from_slope(s: float) -> float:
    if not s < 0:
        raise SlopeSignError(f"slope of F on [U^R, U_bar] must be negative, got {s}")
    return -s / (1.0 - s)


def initial_utility(dq: DerivedQuantities, F: ValueFunction, beta: float | None = None) -> float:
    """Optimal starting promise; ties at beta = beta_bar resolve to U^R."""
    beta = dq.params.beta if beta is None else beta
    return dq.U_bar if beta > compute_beta_bar(dq, F) else dq.U_R


POLICY_COLUMNS = ("U", "region", "mu_e", "mu_s", "mu_o", "U_g", "U_b", "U_hat")


def policy_table(dq: DerivedQuantities, nodes) -> list[dict]:
    rows = []
    for U in np.asarray(nodes, dtype=float):
        st = policy_at(dq, float(U))
        if st.mu_e > 0:
            ug, ub = st.continuations[(ACCEPT_EFFORT, GOOD)], st.continuations[(ACCEPT_EFFORT, BAD)]
        else:
            ug, ub = dq.x_delta, 0.0
        if st.mu_s > 0:
            uh = st.continuations[(ACCEPT_SHIRK, GOOD)]
        elif st.mu_o > 0:
            uh = st.continuations[(REJECT_SHIRK, NONE)]
        else:
            uh = ug
        rows.append({"U": st.U, "region": st.region_tag, "mu_e": st.mu_e, "mu_s": st.mu_s,
                     "mu_o": st.mu_o, "U_g": ug, "U_b": ub, "U_hat": uh})
    return rows


def write_policy_csv(path: str | Path, rows: list[dict], fmt: str = ".12g") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(POLICY_COLUMNS)
        for row in rows:
            wr.writerow([row[k] if isinstance(row[k], str) else format(row[k], fmt) for k in POLICY_COLUMNS])
