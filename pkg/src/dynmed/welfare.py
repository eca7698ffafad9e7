"""First best, mediated and benchmark welfare, the anti-folk gap and the cutoff delta*."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bellman
from .device import compute_beta_bar
from .errors import NonConvergence, NonMonotoneWarning
from .model import DerivedQuantities, ModelParams, derive

Point = tuple[float, float]


def _clip(poly: list[Point], axis: int) -> list[Point]:
    """Clip a convex polygon to the half-plane where coordinate ``axis`` is >= 0."""
    out: list[Point] = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        ina, inb = a[axis] >= 0, b[axis] >= 0
        if ina:
            out.append(a)
        if ina != inb:
            t = a[axis] / (a[axis] - b[axis])
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    # drop repeated vertices created by clipping through a vertex
    dedup: list[Point] = []
    for pt in out:
        if not dedup or max(abs(pt[0] - dedup[-1][0]), abs(pt[1] - dedup[-1][1])) > 1e-15:
            dedup.append(pt)
    if len(dedup) > 1 and max(abs(dedup[0][0] - dedup[-1][0]), abs(dedup[0][1] - dedup[-1][1])) <= 1e-15:
        dedup.pop()
    return dedup


def feasible_ir_polygon(params: ModelParams) -> list[Point]:
    """Vertices of co{(0,0), (w, v_bar), (w+r, v_lo)} within the nonnegative quadrant."""
    tri = [(0.0, 0.0), (params.w, params.v_bar), (params.w + params.r, params.v_lo)]
    return _clip(_clip(tri, 0), 1)


def pareto_frontier(vertices: Sequence[Point]) -> list[Point]:
    """Pareto-efficient vertices of a convex polygon, ordered by increasing U."""
    eff = [v for v in vertices
           if not any(o[0] >= v[0] and o[1] >= v[1] and o != v for o in vertices)]
    return sorted(set(eff))


@dataclass(frozen=True)
class FirstBest:
    W_star: float
    argmax: Point
    frontier_L: tuple[Point, ...]
    polygon: tuple[Point, ...]


def first_best(params: ModelParams, beta: float | None = None) -> FirstBest:
    beta = params.beta if beta is None else beta
    poly = feasible_ir_polygon(params)
    L = pareto_frontier(poly)
    vals = [beta * u + (1 - beta) * v for u, v in L]
    i = int(np.argmax(vals))
    return FirstBest(float(vals[i]), L[i], tuple(L), tuple(poly))


@dataclass(frozen=True)
class MediatedValue:
    """Best value over the mediated frontier, plus the U^R / U_bar comparison."""

    W: float
    U: float
    W_endpoints: float
    U_endpoints: float


def mediated_value(dq: DerivedQuantities, F: bellman.ValueFunction | None, beta: float | None = None) -> MediatedValue:
    """Maximise beta U + (1-beta) F(U) over the grid.

    ``W_endpoints`` restricts the choice to {U^R, U_bar}, the candidates
    named by the characterisation of the optimal initial promise.
    """
    beta = dq.params.beta if beta is None else beta
    if not dq.mediation_nontrivial:
        return MediatedValue(0.0, 0.0, 0.0, 0.0)
    obj = beta * F.nodes + (1 - beta) * F.values
    i = int(np.argmax(obj))
    at_r = beta * dq.U_R + (1 - beta) * F(dq.U_R)
    at_top = beta * dq.U_bar + (1 - beta) * F(dq.U_bar)
    if at_top > at_r:
        w_end, u_end = at_top, dq.U_bar
    else:
        w_end, u_end = at_r, dq.U_R
    return MediatedValue(float(obj[i]), float(F.nodes[i]), float(w_end), float(u_end))


def benchmark_value(dq: DerivedQuantities, beta: float | None = None) -> tuple[float, Point]:
    """Value of the Pareto-optimal PPE payoff vector."""
    beta = dq.params.beta if beta is None else beta
    if not dq.benchmark_nondegenerate:
        return 0.0, (0.0, 0.0)
    U = dq.net_wage
    V = dq.v_bar * U / dq.params.w
    return beta * U + (1 - beta) * V, (U, V)


@dataclass(frozen=True)
class WelfareReport:
    delta: float
    beta: float
    W_star: float
    W_mediated: float
    U_mediated: float
    W_mediated_endpoints: float
    W_benchmark: float
    gap: float
    beta_bar: float | None
    frontier_L: tuple[Point, ...]
    delta_star: float | None = None

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "beta": self.beta,
            "W_star": self.W_star,
            "W_mediated": self.W_mediated,
            "U_mediated": self.U_mediated,
            "W_mediated_endpoints": self.W_mediated_endpoints,
            "W_benchmark": self.W_benchmark,
            "gap": self.gap,
            "beta_bar": self.beta_bar,
            "frontier_L": [list(p) for p in self.frontier_L],
            "delta_star": self.delta_star,
        }


def solve_F(dq: DerivedQuantities, grid_n: int = bellman.DEFAULT_N, tol: float = bellman.DEFAULT_TOL):
    if not dq.mediation_nontrivial:
        return None
    return bellman.policy_evaluate(dq, bellman.make_grid(dq, grid_n), tol=tol)


def welfare_report(
    dq: DerivedQuantities,
    F: bellman.ValueFunction | None = None,
    beta: float | None = None,
    grid_n: int = bellman.DEFAULT_N,
    tol: float = bellman.DEFAULT_TOL,
    delta_star: float | None = None,
) -> WelfareReport:
    beta = dq.params.beta if beta is None else beta
    if F is None:
        F = solve_F(dq, grid_n, tol)
    fb = first_best(dq.params, beta)
    med = mediated_value(dq, F, beta)
    bench, _ = benchmark_value(dq, beta)
    bb = compute_beta_bar(dq, F) if F is not None else None
    return WelfareReport(
        delta=dq.params.delta, beta=beta, W_star=fb.W_star, W_mediated=med.W, U_mediated=med.U,
        W_mediated_endpoints=med.W_endpoints, W_benchmark=bench, gap=fb.W_star - med.W,
        beta_bar=bb, frontier_L=fb.frontier_L, delta_star=delta_star,
    )


def F_at_top(params: ModelParams, delta: float, grid_n: int, tol: float) -> tuple[float, DerivedQuantities, object]:
    dq = derive(params.replace(delta=delta))
    F = solve_F(dq, grid_n, tol)
    return (F(dq.U_bar) if F is not None else 0.0), dq, F


@dataclass
class DeltaStarResult:
    """Outcome of the delta* search.

    ``delta_star`` is None when F_delta(U_bar) never reaches the target on
    the probed range; ``bracket`` then spans the whole search interval and
    ``best_F`` is the largest value seen.
    """

    delta_star: float | None
    bracket: tuple[float, float]
    iterations: int
    target: float
    F_at_delta_star: float | None
    best_F: float
    probes: list[tuple[float, float]] = field(default_factory=list)
    low_branch: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.delta_star is not None

    def to_dict(self) -> dict:
        return {
            "delta_star": self.delta_star,
            "found": self.found,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "target": self.target,
            "F_at_delta_star": self.F_at_delta_star,
            "best_F": self.best_F,
            "probes": [list(p) for p in self.probes],
            "low_branch": self.low_branch,
        }


UPPER_BRACKETS = (0.99, 0.999, 0.9999)


def find_delta_star(
    params: ModelParams,
    tol: float = 1e-3,
    grid_n: int = bellman.DEFAULT_N,
    vi_tol: float = 1e-9,
) -> DeltaStarResult:
    """Smallest delta at which F_delta(U_bar) reaches the benchmark client payoff.

    The target is v_bar max(w - c, 0) / w, the average client's payoff at the
    Pareto-optimal PPE vector. Bisection runs on [delta_lo, hi] with hi grown
    through 0.99, 0.999, 0.9999 until F_hi(U_bar) reaches the target; if it
    never does, no cutoff is returned. The ``low_branch`` entry reports, at
    delta_lo, whether starting at U^R already gives both parties more than
    the benchmark.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    probe_dq = derive(params)
    if probe_dq.delta_lo is None:
        raise NonConvergence("mediation is never nontrivial for these primitives")
    lo = probe_dq.delta_lo
    net = max(params.w - probe_dq.c, 0.0)
    target = probe_dq.v_bar * net / params.w
    probes: list[tuple[float, float]] = []

    def value(d: float) -> float:
        f, _, _ = F_at_top(params, d, grid_n, vi_tol)
        probes.append((d, f))
        return f

    f_lo = value(lo)
    hi = lo if f_lo >= target else None
    if hi is None:
        for cand in UPPER_BRACKETS:
            if cand > lo and value(cand) >= target:
                hi = cand
                break

    it = 0
    a, b = lo, hi
    if hi is not None:
        while b - a > tol:
            m = 0.5 * (a + b)
            if value(m) >= target:
                b = m
            else:
                a = m
            it += 1

    ordered = sorted(probes)
    slack = 10 * vi_tol
    for (d0, f0), (d1, f1) in zip(ordered, ordered[1:]):
        if f1 < f0 - slack:
            warnings.warn(f"F_delta(U_bar) falls from {f0} at {d0} to {f1} at {d1}", NonMonotoneWarning, stacklevel=2)
            break

    dq_lo = derive(params.replace(delta=lo))
    F_lo = solve_F(dq_lo, grid_n, vi_tol)
    F_ur = F_lo(dq_lo.U_R) if F_lo is not None else 0.0
    low_branch = {
        "delta_lo": lo,
        "F_at_U_R": F_ur,
        "client_improves_at_U_R": bool(F_ur > target),
        "worker_improves_at_U_R": bool(dq_lo.U_R > net) if dq_lo.U_R is not None else False,
    }
    best_F = max(f for _, f in probes)
    if hi is None:
        return DeltaStarResult(None, (lo, UPPER_BRACKETS[-1]), 0, target, None, best_F, probes, low_branch)
    f_star = dict(probes).get(b)
    if f_star is None:
        f_star = value(b)
    return DeltaStarResult(b, (a, b), it, target, f_star, best_F, probes, low_branch)


@dataclass(frozen=True)
class SweepRow:
    delta: float
    U_bar: float
    F_at_Ubar: float
    W_star: float
    W_mediated: float
    gap: float


def antifolk_sweep(
    params: ModelParams,
    deltas: Sequence[float],
    beta: float | None = None,
    grid_n: int = bellman.DEFAULT_N,
    tol: float = bellman.DEFAULT_TOL,
) -> list[SweepRow]:
    if len(deltas) == 0:
        raise ValueError("delta list is empty")
    beta = params.beta if beta is None else beta
    rows = []
    for d in deltas:
        dq = derive(params.replace(delta=float(d)))
        F = solve_F(dq, grid_n, tol)
        fb = first_best(params, beta)
        med = mediated_value(dq, F, beta)
        top = F(dq.U_bar) if F is not None else 0.0
        rows.append(SweepRow(float(d), dq.U_bar, top, fb.W_star, med.W, fb.W_star - med.W))
    return rows


def kappa_witness(rows: Sequence[SweepRow]) -> float:
    """Smallest gap over a sweep; a lower-bound witness, not a closed-form constant."""
    return min(r.gap for r in rows) if rows else math.nan


SWEEP_COLUMNS = ("delta", "U_bar", "F_at_Ubar", "W_star", "W_mediated", "gap")


def write_sweep_csv(path: str | Path, rows: Sequence[SweepRow], fmt: str = ".12g") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(SWEEP_COLUMNS)
        for r in rows:
            wr.writerow([format(getattr(r, k), fmt) for k in SWEEP_COLUMNS])
