"""NumPy implementations of the hot loops, used when the extension is absent.

Operation order follows ``_core.pyx`` so the two backends agree to the last
bit on the simulation kernel and to rounding on the oracle.
"""

from __future__ import annotations

import numpy as np

FEAS_TOL = 1e-12


def _candidates(mu_grid, ug_grid, v_bar, v_lo):
    """Flatten (mu_e < 1, mu_s, U_g) candidates in the compiled loop's order."""
    me_list, ms_list, k_list = [], [], []
    ng = len(ug_grid)
    for me in mu_grid:
        if me >= 1.0:
            continue
        cap = 1.0 - me
        ef_cap = me * v_bar / (-v_lo)
        ok = (mu_grid <= cap + FEAS_TOL) & (me * v_bar + mu_grid * v_lo >= -FEAS_TOL)
        ms = np.append(mu_grid[ok], ef_cap if ef_cap <= cap else cap)
        ms = np.minimum(ms, cap)
        n_ug = ng if me > 0 else 1
        me_list.append(np.full(len(ms) * n_ug, me))
        ms_list.append(np.repeat(ms, n_ug))
        k_list.append(np.tile(np.arange(n_ug), len(ms)))
    return np.concatenate(me_list), np.concatenate(ms_list), np.concatenate(k_list)


def oracle_search(queries, nodes, values, mu_grid, ug_grid, consts):
    delta, w, r, c, v_bar, v_lo, p, x, U_bar = consts
    queries = np.asarray(queries, dtype=float)
    mu_grid = np.asarray(mu_grid, dtype=float)
    ug_grid = np.asarray(ug_grid, dtype=float)

    eg = p * np.interp(ug_grid, nodes, values) + (1 - p) * np.interp(ug_grid - x, nodes, values)
    a_eff = (1 - delta) * (w - c) + delta * ug_grid

    ME, MS, K = _candidates(mu_grid, ug_grid, v_bar, v_lo)
    A = a_eff[K]
    UG = np.where(ME > 0, ug_grid[K], 0.0)
    base_val = ME * ((1 - delta) * v_bar + delta * eg[K]) + MS * (1 - delta) * v_lo
    shirk_term = MS * (1 - delta) * (w + r)
    denom = (1 - ME) * delta
    has_full_effort = bool(np.any(mu_grid >= 1.0))

    nq = len(queries)
    best = np.full(nq, -np.inf)
    out_me, out_ms, out_ug, out_uh = (np.zeros(nq) for _ in range(4))
    for qi, U in enumerate(queries):
        uh = (U - ME * A - shirk_term) / denom
        ok = (uh >= -FEAS_TOL) & (uh <= U_bar + FEAS_TOL)
        uh = np.clip(uh, 0.0, U_bar)
        val = np.where(ok, base_val + (1 - ME) * delta * np.interp(uh, nodes, values), -np.inf)
        b = -1e300
        if ok.any():
            j = int(np.argmax(val))
            if val[j] > b:
                b = val[j]
                out_me[qi], out_ms[qi], out_ug[qi], out_uh[qi] = ME[j], MS[j], UG[j], uh[j]
        if has_full_effort:
            ug = (U - (1 - delta) * (w - c)) / delta
            if x - FEAS_TOL <= ug <= U_bar + FEAS_TOL:
                ug = min(max(ug, x), U_bar)
                v1 = (1 - delta) * v_bar + delta * (
                    p * np.interp(ug, nodes, values) + (1 - p) * np.interp(ug - x, nodes, values)
                )
                if v1 > b:
                    b = v1
                    out_me[qi], out_ms[qi], out_ug[qi], out_uh[qi] = 1.0, 0.0, ug, ug
        if b > -1e300:
            best[qi] = b
    return best, out_me, out_ms, out_ug, out_uh


def simulate_paths(uniforms, U0, consts, n_record):
    delta, w, r, c, g, b, p, q, x, U_bar, U_P, U_R, U_I, low_cost = consts
    uniforms = np.asarray(uniforms, dtype=float)
    n = uniforms.shape[0]
    horizon = uniforms.shape[1] // 2
    n_record = min(n_record, n)

    U = np.full(n, float(U0))
    disc = 1.0
    sw = np.zeros(n)
    sc = np.zeros(n)
    sa = np.zeros(n)
    absorb = np.full(n, -1, dtype=np.int64)
    U_rec = np.zeros((n_record, horizon))
    rec_rec = np.zeros((n_record, horizon), dtype=np.int8)
    out_rec = np.zeros((n_record, horizon), dtype=np.int8)
    absorb_cut = U_I * (1 + 1e-12)
    base = (1 - delta) * (w - c)

    for t in range(horizon):
        u1 = uniforms[:, 2 * t]
        u2 = uniforms[:, 2 * t + 1]
        inside = (U <= absorb_cut) if low_cost else (U == 0.0)
        absorb[(absorb < 0) & inside] = t

        top = U > U_R
        mid = ~top & (U >= U_P)
        low = ~top & ~mid

        gap = (1 - delta) * (w + r - U)
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = gap / (gap + U - U_R)
            low_prob = U / U_P
        top_eff = top & (u1 < alpha)
        top_shirk = top & ~top_eff
        low_eff = low & (u1 < low_prob)
        reject = low & ~low_eff
        effort = top_eff | mid | low_eff

        good = np.where(effort, u2 < p, np.where(top_shirk, u2 < q, False))
        ug = (U - base) / delta
        nxt = np.where(top_eff, np.where(good, U_bar, U_bar - x), U)
        nxt = np.where(mid, np.where(good, ug, ug - x), nxt)
        nxt = np.where(low_eff, np.where(good, x, 0.0), nxt)
        nxt = np.where(reject, 0.0, nxt)

        rec = np.where(effort, 0, np.where(top_shirk, 1, 2)).astype(np.int8)
        u_pay = np.where(rec == 0, w, np.where(rec == 1, w + r, 0.0))
        v_pay = np.where(rec == 2, 0.0, np.where(good, g, b))
        acc = np.where(rec == 2, 0.0, 1.0)
        out = np.where(rec == 2, 2, np.where(good, 0, 1)).astype(np.int8)

        U_rec[:, t] = U[:n_record]
        rec_rec[:, t] = rec[:n_record]
        out_rec[:, t] = out[:n_record]
        sw += disc * u_pay
        sc += disc * v_pay
        sa += disc * acc
        disc *= delta
        U = np.clip(nxt, 0.0, U_bar)

    return {
        "worker": (1 - delta) * sw,
        "client": (1 - delta) * sc,
        "accept": (1 - delta) * sa,
        "absorb": absorb,
        "U": U_rec,
        "rec": rec_rec,
        "out": out_rec,
    }
