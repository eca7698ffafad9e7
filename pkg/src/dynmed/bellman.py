"""Upper boundary F of the mediated payoff set.

F is computed by iterating the Bellman operator restricted to the closed-form
policy (policy evaluation) on a grid over [0, U_bar], and cross-checked by an
exhaustive search over the recursive program's choice variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateError, DomainError, Infeasible, NonConvergence, OptimalityViolation
from .model import DerivedQuantities

DEFAULT_N = 2001
DEFAULT_TOL = 1e-8
EDGE_TOL = 1e-12


def _require_nontrivial(dq: DerivedQuantities) -> None:
    if not dq.mediation_nontrivial:
        raise DegenerateError(
            f"delta={dq.params.delta} is below the cutoff {dq.delta_lo}; the mediated set is {{(0, 0)}}"
        )


def _check_domain(dq: DerivedQuantities, U) -> None:
    U = np.asarray(U, dtype=float)
    slack = EDGE_TOL * max(1.0, dq.U_bar)
    if np.any(U < -slack) or np.any(U > dq.U_bar + slack) or np.any(~np.isfinite(U)):
        raise DomainError(f"U outside [0, U_bar] = [0, {dq.U_bar}]")


@dataclass(frozen=True)
class UtilityGrid:
    nodes: np.ndarray
    distinguished: dict[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])

    @property
    def h(self) -> float:
        return self.hi / (self.n - 1) if self.n > 1 else 0.0

    def index_of(self, name: str) -> int:
        return int(np.argmin(np.abs(self.nodes - self.distinguished[name])))


def distinguished_points(dq: DerivedQuantities) -> dict[str, float]:
    return {
        "U_P": dq.U_P,
        "U_I": dq.U_I,
        "U_R": dq.U_R,
        "U_R_lo": dq.U_R_lo,
        "U_bar_minus_x": dq.U_bar - dq.x_delta,
        "x_delta": dq.x_delta,
    }


def make_grid(dq: DerivedQuantities, n: int = DEFAULT_N) -> UtilityGrid:
    """Uniform grid on [0, U_bar] with the kink and regime points moved onto nodes.

    Each distinguished point replaces its nearest node, so no node moves by
    more than h/2 and the spacing stays within [h/2, 3h/2].
    """
    _require_nontrivial(dq)
    if n < 3:
        raise ValueError("grid needs at least 3 nodes")
    nodes = np.linspace(0.0, dq.U_bar, n)
    h = dq.U_bar / (n - 1)
    points = distinguished_points(dq)

    taken: dict[int, float] = {}
    named: dict[str, float] = {}
    for name, val in sorted(points.items(), key=lambda kv: kv[1]):
        if val is None or not (0.0 <= val <= dq.U_bar):
            continue
        named[name] = val
        if val <= EDGE_TOL or val >= dq.U_bar - EDGE_TOL:
            continue
        idx = min(max(int(round(val / h)), 1), n - 2)
        if idx in taken:
            if abs(taken[idx] - val) <= EDGE_TOL:
                continue
            # two points share a cell: push the larger one to the next node
            idx += 1
            if idx > n - 2 or idx in taken:
                continue
        taken[idx] = val
    for idx, val in taken.items():
        nodes[idx] = val
    if np.any(np.diff(nodes) <= 0):
        raise RuntimeError("grid snapping produced non-increasing nodes; use a finer grid")
    return UtilityGrid(nodes=nodes, distinguished=named)


@dataclass(frozen=True)
class ValueFunction:
    """Grid values of F with piecewise-linear interpolation in between."""

    grid: UtilityGrid
    values: np.ndarray
    iterations: int = 0
    last_change: float = 0.0
    error_bound: float = 0.0

    def __call__(self, U):
        out = np.interp(U, self.grid.nodes, self.values)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def slopes(self) -> np.ndarray:
        """Discrete slopes on each grid interval (length n-1)."""
        return np.diff(self.values) / np.diff(self.grid.nodes)

    def second_differences(self) -> np.ndarray:
        """Change in discrete slope across each interior node (length n-2)."""
        return np.diff(self.slopes())

    def perturbed(self, index: int, amount: float) -> ValueFunction:
        vals = self.values.copy()
        vals[index] += amount
        return ValueFunction(self.grid, vals, self.iterations, self.last_change, self.error_bound)

    def check_invariants(self, v_bar: float, eps_cc: float = 1e-9, tol: float = 1e-9) -> list[str]:
        problems = []
        if abs(self.values[0]) > tol:
            problems.append(f"F(0) = {self.values[0]} != 0")
        if self.values.min() < -tol or self.values.max() > v_bar + tol:
            problems.append("F leaves [0, v_bar]")
        if self.grid.n > 2 and self.second_differences().max() > eps_cc:
            problems.append("F is not concave on the grid")
        return problems


@dataclass(frozen=True)
class BellmanSolution:
    mu_e: float
    mu_s: float
    mu_o: float
    U_g: float
    U_b: float
    U_hat: float
    value: float | None = None


def policy_arrays(dq: DerivedQuantities, U):
    """Vectorized closed-form policy: (mu_e, mu_s, U_g, U_hat) for each U."""
    prm = dq.params
    d = prm.delta
    U = np.clip(np.asarray(U, dtype=float), 0.0, dq.U_bar)
    base = (1 - d) * (prm.w - dq.c)

    low = U < dq.U_P
    top = U > dq.U_R
    mid = ~low & ~top

    mu_e = np.where(low, U / dq.U_P, 1.0)
    mu_s = np.zeros_like(U)
    U_g = np.where(low, dq.x_delta, (U - base) / d)
    U_hat = np.where(low, 0.0, U_g)

    gap = (1 - d) * (prm.w + prm.r - U[top])
    alpha = gap / (gap + U[top] - dq.U_R)
    mu_e[top] = alpha
    mu_s[top] = 1 - alpha
    U_g[top] = dq.U_bar
    U_hat[top] = U[top]
    U_g = np.where(mid, np.minimum(U_g, dq.U_bar), U_g)
    return mu_e, mu_s, U_g, U_hat


def alpha_of(dq: DerivedQuantities, U: float) -> float:
    """Effort probability on the secret-randomization segment (U_R, U_bar]."""
    prm = dq.params
    gap = (1 - prm.delta) * (prm.w + prm.r - U)
    return gap / (gap + U - dq.U_R)


def closed_form_policy(dq: DerivedQuantities, U: float) -> BellmanSolution:
    _require_nontrivial(dq)
    _check_domain(dq, U)
    mu_e, mu_s, U_g, U_hat = (a[0] for a in policy_arrays(dq, np.array([U])))
    return BellmanSolution(
        mu_e=float(mu_e),
        mu_s=float(mu_s),
        mu_o=float(max(0.0, 1.0 - mu_e - mu_s)),
        U_g=float(U_g),
        U_b=float(max(U_g - dq.x_delta, 0.0)),
        U_hat=float(U_hat),
    )


def _policy_operator(dq: DerivedQuantities, nodes: np.ndarray):
    """Return (stage, apply) with apply(F) = stage + delta * E[F(continuation)]."""
    prm = dq.params
    d, p = prm.delta, prm.p
    mu_e, mu_s, U_g, U_hat = policy_arrays(dq, nodes)
    U_b = np.maximum(U_g - dq.x_delta, 0.0)
    stage = mu_e * (1 - d) * dq.v_bar + mu_s * (1 - d) * dq.v_lo

    def continuation(F: np.ndarray) -> np.ndarray:
        eff = p * np.interp(U_g, nodes, F) + (1 - p) * np.interp(U_b, nodes, F)
        return mu_e * eff + (1 - mu_e) * np.interp(U_hat, nodes, F)

    return stage, continuation


def default_max_iter(tol: float, delta: float) -> int:
    return int(math.ceil(10 * math.log(tol) / math.log(delta)))


def policy_evaluate(
    dq: DerivedQuantities,
    grid: UtilityGrid | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> ValueFunction:
    """Iterate the policy-restricted Bellman operator from F = 0 to a fixed point.

    Stops once the sup-norm change is at most ``tol (1 - delta) / delta``, so
    the distance to the fixed point is at most ``tol``; that bound is
    returned as ``error_bound``.
    """
    _require_nontrivial(dq)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if grid is None:
        grid = make_grid(dq)
    d = dq.params.delta
    if max_iter is None:
        max_iter = default_max_iter(tol, d)
    nodes = grid.nodes
    stage, continuation = _policy_operator(dq, nodes)

    F = np.zeros_like(nodes)
    stop = tol * (1 - d) / d
    change = math.inf
    for it in range(1, max_iter + 1):
        F_new = stage + d * continuation(F)
        change = float(np.max(np.abs(F_new - F)))
        F = F_new
        if change <= stop:
            return ValueFunction(grid, F, it, change, change * d / (1 - d))
    raise NonConvergence(f"no convergence after {max_iter} sweeps (last change {change:.3e})")


def sweep(dq: DerivedQuantities, F: ValueFunction) -> ValueFunction:
    """One more application of the policy-restricted operator."""
    stage, continuation = _policy_operator(dq, F.nodes)
    vals = stage + dq.params.delta * continuation(F.values)
    return ValueFunction(F.grid, vals, F.iterations + 1)


def policy_value(dq: DerivedQuantities, F: ValueFunction, U) -> np.ndarray:
    """Objective of the recursive program at the closed-form policy, using F."""
    U = np.atleast_1d(np.asarray(U, dtype=float))
    stage, _ = _policy_operator(dq, U)
    prm = dq.params
    mu_e, _, U_g, U_hat = policy_arrays(dq, U)
    U_b = np.maximum(U_g - dq.x_delta, 0.0)
    eff = prm.p * F(U_g) + (1 - prm.p) * F(U_b)
    return stage + prm.delta * (mu_e * eff + (1 - mu_e) * F(U_hat))


def _consts(dq: DerivedQuantities) -> tuple:
    prm = dq.params
    return (prm.delta, prm.w, prm.r, dq.c, dq.v_bar, dq.v_lo, prm.p, dq.x_delta, dq.U_bar)


def search_grids(dq: DerivedQuantities, prob_step: float = 1e-2, util_step: float = 1e-2):
    """Probability grid on [0, 1] and U_g grid on [x_delta, U_bar] for the oracle."""
    n_mu = int(round(1.0 / prob_step))
    mu_grid = np.linspace(0.0, 1.0, n_mu + 1)
    ug = np.arange(dq.x_delta, dq.U_bar, util_step)
    ug_grid = np.unique(np.append(ug, dq.U_bar))
    return mu_grid, ug_grid


def oracle_values(
    dq: DerivedQuantities,
    F: ValueFunction,
    queries,
    prob_step: float = 1e-2,
    util_step: float = 1e-2,
    backend: str | None = None,
):
    """Brute-force maximum of the recursive program at each query utility."""
    _require_nontrivial(dq)
    queries = np.ascontiguousarray(np.atleast_1d(queries), dtype=float)
    _check_domain(dq, queries)
    mu_grid, ug_grid = search_grids(dq, prob_step, util_step)
    kern = _kernels.get_backend(backend)
    return kern.oracle_search(
        queries,
        np.ascontiguousarray(F.nodes),
        np.ascontiguousarray(F.values),
        mu_grid,
        ug_grid,
        _consts(dq),
    )


def bellman_optimality_step(
    dq: DerivedQuantities,
    F: ValueFunction,
    U: float,
    prob_step: float = 1e-2,
    util_step: float = 1e-2,
) -> BellmanSolution:
    """Exhaustive search over (mu_e, mu_s, U_g), solving U_hat from promise keeping.

    Candidates must keep U_hat in [0, U_bar], U_g in [x_delta, U_bar] and the
    client's acceptance constraint. Shirk masses on the constraint boundaries
    are searched alongside the grid; with mu_e = 1 the promise pins U_g.
    """
    best, me, ms, ug, uh = oracle_values(dq, F, [U], prob_step, util_step)
    if not np.isfinite(best[0]):
        raise Infeasible(f"no admissible point found at U={U}")
    mu_e, mu_s = float(me[0]), float(ms[0])
    return BellmanSolution(
        mu_e=mu_e,
        mu_s=mu_s,
        mu_o=max(0.0, 1.0 - mu_e - mu_s),
        U_g=float(ug[0]),
        U_b=float(ug[0] - dq.x_delta) if mu_e > 0 else 0.0,
        U_hat=float(uh[0]),
        value=float(best[0]),
    )


@dataclass
class OracleReport:
    nodes: np.ndarray
    policy_value: np.ndarray
    oracle_value: np.ndarray
    tol_gap: float

    @property
    def gaps(self) -> np.ndarray:
        return self.oracle_value - self.policy_value

    @property
    def worst_index(self) -> int:
        return int(np.argmax(self.gaps))

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.tol_gap

    def rows(self):
        for i, (u, pv, ov) in enumerate(zip(self.nodes, self.policy_value, self.oracle_value)):
            yield {"node": i, "U": float(u), "policy_value": float(pv),
                   "oracle_value": float(ov), "gap": float(ov - pv)}

    def summary(self) -> dict:
        i = self.worst_index
        return {
            "max_gap": self.max_gap,
            "worst_node": i,
            "worst_U": float(self.nodes[i]),
            "tol_gap": self.tol_gap,
            "passed": self.passed,
            "n_nodes": int(len(self.nodes)),
        }


def verify_policy_optimality(
    dq: DerivedQuantities,
    F: ValueFunction,
    tol_gap: float = 5e-3,
    prob_step: float = 1e-2,
    util_step: float = 1e-2,
    nodes=None,
    raise_on_fail: bool = True,
    backend: str | None = None,
) -> OracleReport:
    """Compare the oracle's maximum with the closed-form policy value node by node."""
    U = F.nodes if nodes is None else np.asarray(nodes, dtype=float)
    oracle, *_ = oracle_values(dq, F, U, prob_step, util_step, backend=backend)
    report = OracleReport(U, policy_value(dq, F, U), oracle, tol_gap)
    if raise_on_fail and not report.passed:
        raise OptimalityViolation(
            f"oracle beats the closed-form policy by {report.max_gap:.3e} "
            f"at U={report.nodes[report.worst_index]:.6f} (tolerance {tol_gap:g})",
            report,
        )
    return report


def shape_report(
    dq: DerivedQuantities, F: ValueFunction, eps_strict: float | None = None
) -> dict[str, float]:
    """Discrete curvature and monotonicity diagnostics on the three regions of F.

    Slopes are taken over grid intervals lying inside each region; second
    differences are slope changes at interior nodes.
    """
    if eps_strict is None:
        eps_strict = 1e-9 * dq.v_bar
    U = F.nodes
    s = F.slopes()
    d2 = F.second_differences()
    h = F.grid.h
    left, right = U[:-1], U[1:]
    tol = EDGE_TOL * dq.U_bar

    rising = (left >= 0) & (right <= dq.U_R + tol)
    falling = (left >= dq.U_R - tol)
    linear = right <= dq.U_I + tol
    mid_nodes = U[1:-1]
    strict = (mid_nodes > dq.U_I + 2 * h) & (mid_nodes < dq.U_R - 2 * h)
    return {
        "min_slope_rising": float(s[rising].min()),
        "max_slope_falling": float(s[falling].max()),
        "slope_var_top": float(np.ptp(s[falling])),
        "slope_var_linear": float(np.ptp(s[linear])),
        "max_second_diff": float(d2.max()),
        "max_second_diff_strict": float(d2[strict].max()) if strict.any() else -math.inf,
        "eps_strict": eps_strict,
        "peak_U": float(U[int(np.argmax(F.values))]),
    }
