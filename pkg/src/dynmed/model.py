"""Primitives of the worker/client stage game and their closed-form consequences.

A long-lived worker faces a fresh client each period. The client accepts
or rejects; an accepted worker exerts effort or shirks. Effort yields the
good output ``g`` with probability ``p``, shirking with probability ``q``;
otherwise the bad output ``b`` realizes. The worker earns ``w`` when
accepted and an extra rent ``r`` when shirking.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from .errors import OrderViolation, OutputValueViolation, SignViolation, ValidationError

PARAM_KEYS = ("p", "q", "g", "b", "w", "r", "delta", "beta")

# relative slack for knife-edge comparisons between closed forms
REL_TOL = 1e-12

ACCEPT, REJECT = "accept", "reject"
EFFORT, SHIRK = "effort", "shirk"
GOOD, BAD, NONE = "g", "b", "0"


class Regime(str, Enum):
    LOW_COST = "LowCost"
    HIGH_COST = "HighCost"


def _geq(a: float, b: float) -> bool:
    return a >= b - REL_TOL * max(abs(a), abs(b), 1.0)


@dataclass(frozen=True)
class ModelParams:
    p: float
    q: float
    g: float
    b: float
    w: float
    r: float
    delta: float
    beta: float

    @property
    def v_bar(self) -> float:
        return self.p * self.g + (1 - self.p) * self.b

    @property
    def v_lo(self) -> float:
        return self.q * self.g + (1 - self.q) * self.b

    def replace(self, **changes: float) -> ModelParams:
        """Return a re-validated copy with some fields changed."""
        data = asdict(self)
        data.update(changes)
        return validate(data)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class DerivedQuantities:
    """Closed-form constants of the model.

    Utilities that only exist when mediation is nontrivial (``U_P``,
    ``U_R``, ``U_R_lo``, ``U_I``) are ``None`` otherwise, and ``U_bar`` is
    zero. ``gamma`` is ``None`` outside the low-cost regime; ``delta_lo``
    is ``None`` when no discount factor below one makes mediation
    nontrivial.
    """

    params: ModelParams
    v_bar: float
    v_lo: float
    c: float
    x_delta: float
    alpha_lo: float
    delta_lo: float | None
    U_bar: float
    U_P: float | None
    U_R: float | None
    U_R_lo: float | None
    U_I: float | None
    gamma: float | None
    regime: Regime
    mediation_nontrivial: bool

    @property
    def net_wage(self) -> float:
        """w - c, the worker's best benchmark payoff when positive."""
        return self.params.w - self.c

    @property
    def benchmark_nondegenerate(self) -> bool:
        return self.regime is Regime.LOW_COST

    def to_dict(self) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k != "params"}
        out["regime"] = self.regime.value
        return out


def _number(raw: Mapping[str, Any], key: str) -> float:
    if key not in raw:
        raise ValidationError(f"missing parameter {key!r}")
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"parameter {key!r} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"parameter {key!r} must be finite, got {value!r}")
    return value


def validate(raw: Mapping[str, Any]) -> ModelParams:
    """Check a flat parameter record and build :class:`ModelParams`."""
    vals = {k: _number(raw, k) for k in PARAM_KEYS}
    p, q = vals["p"], vals["q"]
    if not 0 < q < p < 1:
        raise OrderViolation(f"need 0 < q < p < 1, got q={q}, p={p}")
    if vals["w"] <= 0:
        raise SignViolation(f"need w > 0, got w={vals['w']}")
    if vals["r"] <= 0:
        raise SignViolation(f"need r > 0, got r={vals['r']}")
    if not 0 < vals["delta"] < 1:
        raise SignViolation(f"need 0 < delta < 1, got delta={vals['delta']}")
    if not 0 <= vals["beta"] <= 1:
        raise SignViolation(f"need 0 <= beta <= 1, got beta={vals['beta']}")
    params = ModelParams(**vals)
    if not params.v_lo < 0:
        raise OutputValueViolation(f"need v_lo = q*g + (1-q)*b < 0, got {params.v_lo}")
    if not params.v_bar > 0:
        raise OutputValueViolation(f"need v_bar = p*g + (1-p)*b > 0, got {params.v_bar}")
    return params


def load_params(path: str | Path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        return validate(json.load(fh))


def derive(params: ModelParams) -> DerivedQuantities:
    p, q, w, r, d = params.p, params.q, params.w, params.r, params.delta
    v_bar, v_lo = params.v_bar, params.v_lo

    c = r / ((1 - q) / (1 - p) - 1)
    x_delta = (1 - d) * r / (d * (p - q))
    alpha_lo = -v_lo / (v_bar - v_lo)

    # Stackelberg payoff net of the expected moral-hazard cost
    stackelberg_net = alpha_lo * (w - c) + (1 - alpha_lo) * (w + r)
    if stackelberg_net > 0:
        delta_lo = r / (r + (p - q) * stackelberg_net)
        nontrivial = _geq(d, delta_lo)
    else:
        delta_lo = None
        nontrivial = False

    regime = Regime.LOW_COST if _geq(w - c, x_delta) else Regime.HIGH_COST
    gamma = None
    if regime is Regime.LOW_COST:
        gamma = (1 - d) * r / (d * (w + r) * (p - q) - d * (1 - q) * r)
        gamma = min(gamma, 1.0)

    if nontrivial:
        U_bar = stackelberg_net
        U_P = (1 - d) * (w - c) + d * x_delta
        U_R = (1 - d) * (w - c) + d * U_bar
        U_R_lo = (1 - d) * (w - c) + d * U_R
        U_I = w - c if regime is Regime.LOW_COST else U_P
    else:
        U_bar = 0.0
        U_P = U_R = U_R_lo = U_I = None

    return DerivedQuantities(
        params=params,
        v_bar=v_bar,
        v_lo=v_lo,
        c=c,
        x_delta=x_delta,
        alpha_lo=alpha_lo,
        delta_lo=delta_lo,
        U_bar=U_bar,
        U_P=U_P,
        U_R=U_R,
        U_R_lo=U_R_lo,
        U_I=U_I,
        gamma=gamma,
        regime=regime,
        mediation_nontrivial=nontrivial,
    )


def output_distribution(params: ModelParams, client: str, worker: str) -> dict[str, float]:
    """Distribution over outputs {g, b, 0} given an action profile."""
    if client == REJECT:
        return {GOOD: 0.0, BAD: 0.0, NONE: 1.0}
    if client != ACCEPT:
        raise ValueError(f"unknown client action {client!r}")
    if worker == EFFORT:
        prob_good = params.p
    elif worker == SHIRK:
        prob_good = params.q
    else:
        raise ValueError(f"unknown worker action {worker!r}")
    return {GOOD: prob_good, BAD: 1 - prob_good, NONE: 0.0}


def stage_payoffs(params: ModelParams, client: str, worker: str) -> tuple[float, float]:
    """Worker payoff and expected client payoff of one action profile."""
    if client == REJECT:
        return 0.0, 0.0
    if worker == EFFORT:
        return params.w, params.v_bar
    if worker == SHIRK:
        return params.w + params.r, params.v_lo
    raise ValueError(f"unknown worker action {worker!r}")
