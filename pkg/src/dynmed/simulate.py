"""Monte Carlo runs of the optimal device and of the benchmark automaton.

Random streams: path ``i`` of a run with seed ``s`` draws from
``Generator(PCG64(SeedSequence(s, spawn_key=(i,))))``, two uniforms per
period (the first picks the recommendation, the second the output). A
path's draws therefore do not depend on chunking, on the number of paths,
or on the horizon beyond the prefix it uses.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from .benchmark import build_automaton
from .device import ACCEPT_EFFORT, ACCEPT_SHIRK, REJECT_SHIRK, PolicyStep, policy_at
from .errors import DegenerateError, DomainError, TruncationWarning
from .model import ACCEPT, BAD, EFFORT, GOOD, NONE, REJECT, SHIRK, DerivedQuantities, Regime

TRUNCATION_TOL = 1e-6
DEFAULT_CHUNK = 512

REC_CODES = {0: (ACCEPT, EFFORT), 1: (ACCEPT, SHIRK), 2: (REJECT, SHIRK)}
OUT_CODES = {0: GOOD, 1: BAD, 2: NONE}


def default_horizon(dq: DerivedQuantities) -> int:
    """Smallest t with delta^t (w + r) < 1e-6."""
    prm = dq.params
    t = math.log(TRUNCATION_TOL / (prm.w + prm.r)) / math.log(prm.delta)
    h = max(int(math.floor(t)) + 1, 1)
    while prm.delta**h * (prm.w + prm.r) >= TRUNCATION_TOL:
        h += 1
    return h


def path_uniforms(seed: int, start: int, stop: int, horizon: int) -> np.ndarray:
    out = np.empty((stop - start, 2 * horizon))
    for row, i in enumerate(range(start, stop)):
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))
        out[row] = gen.random(2 * horizon)
    return out


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


@dataclass
class SimulationStats:
    n_paths: int
    horizon: int
    seed: int
    U0: float
    worker_mean: float
    worker_se: float
    client_mean: float
    client_se: float
    acceptance_frequency: float
    acceptance_se: float
    tail_bound: float
    absorption_times: np.ndarray = field(repr=False)

    @property
    def not_absorbed(self) -> int:
        return int(np.sum(self.absorption_times < 0))

    def absorbed_fraction(self, by: int | None = None) -> float:
        """Share of paths absorbed strictly before period ``by`` (default: the horizon)."""
        by = self.horizon if by is None else by
        t = self.absorption_times
        return float(np.mean((t >= 0) & (t < by)))

    def median_absorption(self) -> float | None:
        """Median of T counting unabsorbed paths as +inf; None if more than half are unabsorbed."""
        t = np.where(self.absorption_times < 0, np.inf, self.absorption_times.astype(float))
        med = float(np.median(t))
        return med if math.isfinite(med) else None

    def to_dict(self) -> dict:
        t = self.absorption_times
        hit = t[t >= 0]
        quant = {f"q{int(q * 100)}": float(np.quantile(hit, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)} if len(hit) else {}
        return {
            "n_paths": self.n_paths,
            "horizon": self.horizon,
            "seed": self.seed,
            "U0": self.U0,
            "worker_mean": self.worker_mean,
            "worker_se": self.worker_se,
            "client_mean": self.client_mean,
            "client_se": self.client_se,
            "acceptance_frequency": self.acceptance_frequency,
            "acceptance_se": self.acceptance_se,
            "tail_bound": self.tail_bound,
            "absorbed": int(len(hit)),
            "not_absorbed": self.not_absorbed,
            "median_absorption": self.median_absorption(),
            "absorption_quantiles": quant,
        }


@dataclass
class Trajectories:
    """Recorded paths: promise, recommendation code and output code per period."""

    U: np.ndarray
    rec: np.ndarray
    out: np.ndarray
    params_w: float
    params_r: float

    def rows(self):
        for i in range(self.U.shape[0]):
            for t in range(self.U.shape[1]):
                client, worker = REC_CODES[int(self.rec[i, t])]
                z = OUT_CODES[int(self.out[i, t])]
                yield i, t, float(self.U[i, t]), client, worker, z


def _check_start(dq: DerivedQuantities, U0: float) -> float:
    if not dq.mediation_nontrivial:
        raise DegenerateError("mediated payoff set is degenerate")
    if not (0.0 <= U0 <= dq.U_bar * (1 + 1e-12)):
        raise DomainError(f"U0={U0} outside [0, {dq.U_bar}]")
    return min(float(U0), dq.U_bar)


def _resolve_horizon(dq: DerivedQuantities, horizon: int | None) -> int:
    if horizon is None:
        return default_horizon(dq)
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if dq.params.delta**horizon > TRUNCATION_TOL:
        warnings.warn(
            f"delta^horizon = {dq.params.delta ** horizon:.3e} exceeds {TRUNCATION_TOL:g}; "
            "discounted sums are noticeably truncated",
            TruncationWarning,
            stacklevel=3,
        )
    return int(horizon)


def _kernel_consts(dq: DerivedQuantities) -> tuple:
    prm = dq.params
    return (prm.delta, prm.w, prm.r, dq.c, prm.g, prm.b, prm.p, prm.q, dq.x_delta, dq.U_bar,
            dq.U_P, dq.U_R, dq.U_I, dq.regime is Regime.LOW_COST)


def simulate(
    dq: DerivedQuantities,
    U0: float,
    horizon: int | None = None,
    n_paths: int = 10_000,
    seed: int = 0,
    n_record: int = 0,
    chunk: int = DEFAULT_CHUNK,
    backend: str | None = None,
) -> tuple[SimulationStats, Trajectories | None]:
    """Run the device from ``U0`` along ``n_paths`` independent paths.

    Returns summary statistics and, when ``n_record > 0``, the first
    ``n_record`` paths in full.
    """
    U0 = _check_start(dq, U0)
    horizon = _resolve_horizon(dq, horizon)
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    kern = _kernels.get_backend(backend)
    consts = _kernel_consts(dq)

    parts = []
    for start in range(0, n_paths, chunk):
        stop = min(start + chunk, n_paths)
        uni = path_uniforms(seed, start, stop, horizon)
        parts.append(kern.simulate_paths(uni, U0, consts, max(0, min(n_record - start, stop - start))))
    worker = np.concatenate([p["worker"] for p in parts])
    client = np.concatenate([p["client"] for p in parts])
    accept = np.concatenate([p["accept"] for p in parts])
    absorb = np.concatenate([p["absorb"] for p in parts])

    traj = None
    if n_record > 0:
        traj = Trajectories(
            U=np.concatenate([p["U"] for p in parts])[:n_record],
            rec=np.concatenate([p["rec"] for p in parts])[:n_record],
            out=np.concatenate([p["out"] for p in parts])[:n_record],
            params_w=dq.params.w,
            params_r=dq.params.r,
        )

    prm = dq.params
    wm, ws = _mean_se(worker)
    cm, cs = _mean_se(client)
    am, ase = _mean_se(accept)
    stats = SimulationStats(
        n_paths=n_paths, horizon=horizon, seed=seed, U0=U0,
        worker_mean=wm, worker_se=ws, client_mean=cm, client_se=cs,
        acceptance_frequency=am, acceptance_se=ase,
        tail_bound=(prm.w + prm.r) * prm.delta**horizon,
        absorption_times=absorb,
    )
    return stats, traj


def absorption_time(U_path, dq: DerivedQuantities) -> int | None:
    """First period at which the path is absorbed, or None if it never is."""
    U_path = np.asarray(U_path, dtype=float)
    if dq.regime is Regime.LOW_COST:
        hit = np.nonzero(U_path <= dq.U_I * (1 + 1e-12))[0]
    else:
        hit = np.nonzero(U_path == 0.0)[0]
    return int(hit[0]) if len(hit) else None


TRAJECTORY_COLUMNS = ("path", "t", "U", "rec_client", "rec_worker", "action", "output", "u", "v")


def write_trajectories_csv(path: str | Path, traj: Trajectories, dq: DerivedQuantities, fmt: str = ".12g") -> None:
    prm = dq.params
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRAJECTORY_COLUMNS)
        for i, t, U, client, worker, z in traj.rows():
            # obedient play: the worker's action is the recommendation
            if client == REJECT:
                u = v = 0.0
            else:
                u = prm.w + (prm.r if worker == SHIRK else 0.0)
                v = prm.g if z == GOOD else prm.b
            wr.writerow([i, t, format(U, fmt), client, worker, worker, z, format(u, fmt), format(v, fmt)])


@dataclass(frozen=True)
class AuditReport:
    n_paths: int
    horizon: int
    steps_checked: int
    max_worker_violation: float
    max_client_violation: float
    worst_U: float | None

    @property
    def max_violation(self) -> float:
        return max(self.max_worker_violation, self.max_client_violation)


def _one_shot_gain(dq: DerivedQuantities, step: PolicyStep) -> tuple[float, float]:
    """Worker's best one-shot deviation gain and client's gain from rejecting."""
    prm = dq.params
    d = prm.delta
    worker_gain = -math.inf
    for rec, cont_of in ((ACCEPT_EFFORT, step.continuations), (ACCEPT_SHIRK, step.continuations)):
        if step.prob(rec) <= 0:
            continue
        ug, ub = cont_of[(rec, GOOD)], cont_of[(rec, BAD)]
        effort_val = (1 - d) * prm.w + d * (prm.p * ug + (1 - prm.p) * ub)
        shirk_val = (1 - d) * (prm.w + prm.r) + d * (prm.q * ug + (1 - prm.q) * ub)
        gain = shirk_val - effort_val if rec is ACCEPT_EFFORT else effort_val - shirk_val
        worker_gain = max(worker_gain, gain)
    mass = step.mu_e + step.mu_s
    client_gain = -math.inf
    if mass > 0:
        client_gain = -(step.mu_e * dq.v_bar + step.mu_s * dq.v_lo) / mass
    return worker_gain, client_gain


def deviation_audit(
    dq: DerivedQuantities,
    U0: float,
    n_paths: int = 200,
    seed: int = 0,
    horizon: int | None = None,
    policy: Callable[[DerivedQuantities, float], PolicyStep] = policy_at,
) -> AuditReport:
    """Walk paths under ``policy`` and record the largest profitable one-shot deviation.

    At effort recommendations the worker's gain from shirking is computed
    from the step's continuation map, at shirk recommendations the gain
    from effort, and for accepting clients the gain from rejecting.
    Violations are positive gains; obedient play gives values <= 0.
    """
    U0 = _check_start(dq, U0)
    horizon = _resolve_horizon(dq, horizon)
    prm = dq.params
    worst_w = worst_c = -math.inf
    worst_U = None
    checked = 0
    for i in range(n_paths):
        uni = path_uniforms(seed, i, i + 1, horizon)[0]
        U = U0
        for t in range(horizon):
            step = policy(dq, U)
            wg, cg = _one_shot_gain(dq, step)
            if wg > -math.inf or cg > -math.inf:
                checked += 1
            if wg > worst_w:
                worst_w, worst_U = wg, U
            worst_c = max(worst_c, cg)
            u1, u2 = uni[2 * t], uni[2 * t + 1]
            if u1 < step.mu_e:
                rec, z = ACCEPT_EFFORT, GOOD if u2 < prm.p else BAD
            elif u1 < step.mu_e + step.mu_s:
                rec, z = ACCEPT_SHIRK, GOOD if u2 < prm.q else BAD
            else:
                rec, z = REJECT_SHIRK, NONE
            U = min(max(step.continuations[(rec, z)], 0.0), dq.U_bar)
    return AuditReport(
        n_paths=n_paths,
        horizon=horizon,
        steps_checked=checked,
        max_worker_violation=max(worst_w, 0.0) if worst_w > -math.inf else 0.0,
        max_client_violation=max(worst_c, 0.0) if worst_c > -math.inf else 0.0,
        worst_U=worst_U,
    )


def simulate_benchmark(
    dq: DerivedQuantities,
    horizon: int | None = None,
    n_paths: int = 10_000,
    seed: int = 0,
    variant: str = "pure",
) -> SimulationStats:
    """Run the grim-trigger benchmark automaton from state N.

    Per period the first uniform decides effort (mixed variant) and the
    public punishment draw after a bad output; the second decides the output.
    """
    auto = build_automaton(dq, variant)
    horizon = _resolve_horizon(dq, horizon)
    prm = dq.params
    d = prm.delta
    worker = np.empty(n_paths)
    client = np.empty(n_paths)
    accept = np.empty(n_paths)
    absorb = np.empty(n_paths, dtype=np.int64)
    for start in range(0, n_paths, DEFAULT_CHUNK):
        stop = min(start + DEFAULT_CHUNK, n_paths)
        uni = path_uniforms(seed, start, stop, horizon)
        m = stop - start
        normal = np.ones(m, dtype=bool)
        hit = np.full(m, -1, dtype=np.int64)
        sw, sc, sa = np.zeros(m), np.zeros(m), np.zeros(m)
        disc = 1.0
        for t in range(horizon):
            u1, u2 = uni[:, 2 * t], uni[:, 2 * t + 1]
            hit[(hit < 0) & ~normal] = t
            if variant == "pure":
                effort = normal
                trigger = u1 < auto.gamma
            else:
                # the first uniform is split between the effort draw and the trigger draw
                effort = normal & (u1 < auto.effort_prob_in_N)
                trigger = np.where(u1 < auto.effort_prob_in_N, u1 / auto.effort_prob_in_N,
                                   (u1 - auto.effort_prob_in_N) / (1 - auto.effort_prob_in_N)) < auto.gamma
            good = normal & np.where(effort, u2 < prm.p, u2 < prm.q)
            pay_w = np.where(normal, np.where(effort, prm.w, prm.w + prm.r), 0.0)
            pay_c = np.where(normal, np.where(good, prm.g, prm.b), 0.0)
            sw += disc * pay_w
            sc += disc * pay_c
            sa += disc * normal
            disc *= d
            normal = normal & ~(~good & trigger)
        worker[start:stop] = (1 - d) * sw
        client[start:stop] = (1 - d) * sc
        accept[start:stop] = (1 - d) * sa
        absorb[start:stop] = hit
    wm, ws = _mean_se(worker)
    cm, cs = _mean_se(client)
    am, ase = _mean_se(accept)
    return SimulationStats(
        n_paths=n_paths, horizon=horizon, seed=seed, U0=auto.W_N,
        worker_mean=wm, worker_se=ws, client_mean=cm, client_se=cs,
        acceptance_frequency=am, acceptance_se=ase,
        tail_bound=(prm.w + prm.r) * d**horizon, absorption_times=absorb,
    )
