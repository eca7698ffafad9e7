"""No-mediation benchmark: the PPE payoff set and its grim-trigger automata."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import DomainError, RegimeError
from .model import ACCEPT, EFFORT, REJECT, SHIRK, DerivedQuantities

NORMAL, PUNISH = "N", "P"


@dataclass(frozen=True)
class PpeSet:
    degenerate: bool
    worker_interval: tuple[float, float]
    vertices: tuple[tuple[float, float], ...]

    @property
    def pareto_optimal(self) -> tuple[float, float]:
        """The unique Pareto-optimal PPE payoff vector."""
        return max(self.vertices, key=lambda uv: (uv[0], uv[1]))


@dataclass(frozen=True)
class BenchmarkAutomaton:
    """Two-state public automaton; N is normal play, P is absorbing rejection.

    ``continuation_values`` maps each state to (worker value, client stage
    value); ``client_value`` is the average client's discounted payoff.
    """

    variant: str
    gamma: float
    effort_prob_in_N: float
    states: tuple[str, str] = (NORMAL, PUNISH)
    action_profile_per_state: dict[str, tuple[str, str]] = field(default_factory=dict)
    continuation_values: dict[str, tuple[float, float]] = field(default_factory=dict)
    client_value: float = 0.0

    @property
    def W_N(self) -> float:
        return self.continuation_values[NORMAL][0]

    @property
    def payoffs(self) -> tuple[float, float]:
        """Ex-ante (worker, average client) payoffs; play starts in N."""
        return self.W_N, self.client_value

    def to_dict(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "states": list(self.states),
            "gamma": self.gamma,
            "effort_prob_in_N": self.effort_prob_in_N,
            "actions": {s: list(a) for s, a in self.action_profile_per_state.items()},
            "values": {s: list(v) for s, v in self.continuation_values.items()},
            "W_N": self.W_N,
            "payoffs": list(self.payoffs),
        }


def ppe_payoff_set(dq: DerivedQuantities) -> PpeSet:
    if not dq.benchmark_nondegenerate:
        return PpeSet(True, (0.0, 0.0), ((0.0, 0.0),))
    top = dq.net_wage
    return PpeSet(
        degenerate=False,
        worker_interval=(0.0, top),
        vertices=((0.0, 0.0), (top, 0.0), (top, dq.v_bar * top / dq.params.w)),
    )


def upper_boundary_G(dq: DerivedQuantities, U: float) -> float:
    """Upper boundary of the PPE set, G(U) = (v_bar / w) U."""
    if not dq.benchmark_nondegenerate:
        raise DomainError("PPE set is degenerate at the origin; G is undefined")
    if not 0 <= U <= dq.net_wage:
        raise DomainError(f"U={U} outside [0, w-c] = [0, {dq.net_wage}]")
    return dq.v_bar / dq.params.w * U


def build_automaton(dq: DerivedQuantities, variant: str = "pure") -> BenchmarkAutomaton:
    """Grim-trigger automaton attaining the top of the benchmark set.

    The pure variant always asks for effort in N and attains
    ``(w-c, v_bar (w-c)/w)``; the mixed variant plays effort with the
    Stackelberg probability and leaves clients indifferent, attaining
    ``(w-c, 0)``. After a bad output in N play moves to P with probability
    ``gamma``; P is absorbing.
    """
    if variant not in ("pure", "mixed"):
        raise ValueError(f"variant must be 'pure' or 'mixed', got {variant!r}")
    if not dq.benchmark_nondegenerate:
        raise RegimeError("w - c < x_delta: no acceptance can be sustained without mediation")

    prm = dq.params
    gamma = dq.gamma
    d = prm.delta
    W_N = (1 - d) * prm.w / (1 - d * (1 - gamma * (1 - prm.p)))

    effort_prob = 1.0 if variant == "pure" else dq.alpha_lo
    stage_client_N = effort_prob * dq.v_bar + (1 - effort_prob) * dq.v_lo
    # discounted frequency of state N equals W_N / w; the mixed stage value is 0
    client_value = stage_client_N * W_N / prm.w

    normal_action = (ACCEPT, EFFORT) if variant == "pure" else (ACCEPT, "mixed")
    return BenchmarkAutomaton(
        variant=variant,
        gamma=gamma,
        effort_prob_in_N=effort_prob,
        action_profile_per_state={NORMAL: normal_action, PUNISH: (REJECT, SHIRK)},
        continuation_values={NORMAL: (W_N, stage_client_N), PUNISH: (0.0, 0.0)},
        client_value=client_value,
    )
