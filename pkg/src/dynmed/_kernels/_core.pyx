# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: brute-force Bellman search and device path simulation.

Both functions mirror ``_fallback.py`` operation for operation; keep the two
in sync when editing.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double FEAS_TOL = 1e-12


cdef inline double _interp(const double[::1] xs, const double[::1] fs, Py_ssize_t n,
                           double u, double inv_h):
    cdef Py_ssize_t j
    if u <= xs[0]:
        return fs[0]
    if u >= xs[n - 1]:
        return fs[n - 1]
    j = <Py_ssize_t>(u * inv_h)
    if j > n - 2:
        j = n - 2
    while j > 0 and xs[j] > u:
        j -= 1
    while j < n - 2 and xs[j + 1] <= u:
        j += 1
    # same association as numpy.interp so both backends agree bitwise
    return (fs[j + 1] - fs[j]) / (xs[j + 1] - xs[j]) * (u - xs[j]) + fs[j]


def oracle_search(const double[::1] queries, const double[::1] nodes, const double[::1] values,
                  const double[::1] mu_grid, const double[::1] ug_grid, tuple consts):
    cdef double delta, w, r, c, v_bar, v_lo, p, x, U_bar
    delta, w, r, c, v_bar, v_lo, p, x, U_bar = consts

    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t nn = nodes.shape[0]
    cdef Py_ssize_t nm = mu_grid.shape[0]
    cdef Py_ssize_t ng = ug_grid.shape[0]
    cdef double inv_h = (nn - 1) / nodes[nn - 1]

    best_arr = np.full(nq, -np.inf)
    me_arr = np.zeros(nq)
    ms_arr = np.zeros(nq)
    ug_arr = np.zeros(nq)
    uh_arr = np.zeros(nq)
    cdef double[::1] best_v = best_arr
    cdef double[::1] best_me = me_arr
    cdef double[::1] best_ms = ms_arr
    cdef double[::1] best_ug = ug_arr
    cdef double[::1] best_uh = uh_arr

    # continuation value after an effort recommendation, per U_g candidate
    cdef double[::1] eg = np.empty(ng)
    cdef double[::1] a_eff = np.empty(ng)
    cdef Py_ssize_t k
    for k in range(ng):
        eg[k] = p * _interp(nodes, values, nn, ug_grid[k], inv_h) \
            + (1 - p) * _interp(nodes, values, nn, ug_grid[k] - x, inv_h)
        a_eff[k] = (1 - delta) * (w - c) + delta * ug_grid[k]

    cdef double[::1] ms_cand = np.empty(nm + 2)
    cdef Py_ssize_t qi, i, j, ns, kk, k_lo, k_hi
    cdef double U, me, ms, ug, uh, val, best, shirk_term, denom, ef_cap, cap
    cdef double b_me, b_ms, b_ug, b_uh
    for qi in range(nq):
        U = queries[qi]
        best = -1e300
        b_me = b_ms = b_ug = b_uh = 0.0
        for i in range(nm):
            me = mu_grid[i]
            if me >= 1.0:
                # no mass left for shirk or reject: U_g is pinned by promise keeping
                ug = (U - (1 - delta) * (w - c)) / delta
                if ug < x - FEAS_TOL or ug > U_bar + FEAS_TOL:
                    continue
                if ug < x:
                    ug = x
                if ug > U_bar:
                    ug = U_bar
                val = (1 - delta) * v_bar + delta * (
                    p * _interp(nodes, values, nn, ug, inv_h)
                    + (1 - p) * _interp(nodes, values, nn, ug - x, inv_h))
                if val > best:
                    best = val
                    b_me = me; b_ms = 0.0; b_ug = ug; b_uh = ug
                continue
            # candidate shirk masses: grid points plus the two constraint boundaries
            cap = 1.0 - me
            ef_cap = me * v_bar / (-v_lo)
            ns = 0
            for j in range(nm):
                if mu_grid[j] <= cap + FEAS_TOL and me * v_bar + mu_grid[j] * v_lo >= -FEAS_TOL:
                    ms_cand[ns] = mu_grid[j]
                    ns += 1
            if ef_cap <= cap:
                ms_cand[ns] = ef_cap
            else:
                ms_cand[ns] = cap
            ns += 1
            denom = (1 - me) * delta
            for j in range(ns):
                ms = ms_cand[j]
                if ms > cap:
                    ms = cap
                shirk_term = ms * (1 - delta) * (w + r)
                k_hi = ng if me > 0 else 1
                for kk in range(k_hi):
                    uh = (U - me * a_eff[kk] - shirk_term) / denom
                    if uh < -FEAS_TOL or uh > U_bar + FEAS_TOL:
                        continue
                    if uh < 0:
                        uh = 0.0
                    if uh > U_bar:
                        uh = U_bar
                    val = me * ((1 - delta) * v_bar + delta * eg[kk]) \
                        + ms * (1 - delta) * v_lo \
                        + (1 - me) * delta * _interp(nodes, values, nn, uh, inv_h)
                    if val > best:
                        best = val
                        b_me = me; b_ms = ms; b_uh = uh
                        b_ug = ug_grid[kk] if me > 0 else 0.0
        if best > -1e300:
            best_v[qi] = best
            best_me[qi] = b_me
            best_ms[qi] = b_ms
            best_ug[qi] = b_ug
            best_uh[qi] = b_uh
    return best_arr, me_arr, ms_arr, ug_arr, uh_arr


def simulate_paths(const double[:, ::1] uniforms, double U0, tuple consts, Py_ssize_t n_record):
    cdef double delta, w, r, c, g, b, p, q, x, U_bar, U_P, U_R, U_I
    cdef bint low_cost
    delta, w, r, c, g, b, p, q, x, U_bar, U_P, U_R, U_I, low_cost = consts

    cdef Py_ssize_t n = uniforms.shape[0]
    cdef Py_ssize_t horizon = uniforms.shape[1] // 2
    if n_record > n:
        n_record = n

    worker_arr = np.zeros(n)
    client_arr = np.zeros(n)
    accept_arr = np.zeros(n)
    absorb_arr = np.full(n, -1, dtype=np.int64)
    U_rec = np.zeros((n_record, horizon))
    rec_rec = np.zeros((n_record, horizon), dtype=np.int8)
    out_rec = np.zeros((n_record, horizon), dtype=np.int8)
    cdef double[::1] worker = worker_arr
    cdef double[::1] client = client_arr
    cdef double[::1] accept = accept_arr
    cdef long long[::1] absorb = absorb_arr
    cdef double[:, ::1] U_path = U_rec
    cdef signed char[:, ::1] rec_path = rec_rec
    cdef signed char[:, ::1] out_path = out_rec

    cdef double absorb_cut = U_I * (1 + 1e-12)
    cdef double base = (1 - delta) * (w - c)
    cdef Py_ssize_t i, t
    cdef double U, disc, sw, sc, sa, alpha, ug, nxt, u_pay, v_pay, acc, gap
    cdef signed char rec, out
    cdef bint good
    for i in range(n):
        U = U0
        disc = 1.0
        sw = 0.0
        sc = 0.0
        sa = 0.0
        for t in range(horizon):
            if absorb[i] < 0:
                if (low_cost and U <= absorb_cut) or ((not low_cost) and U == 0.0):
                    absorb[i] = t
            if U > U_R:
                gap = (1 - delta) * (w + r - U)
                alpha = gap / (gap + U - U_R)
                if uniforms[i, 2 * t] < alpha:
                    rec = 0
                    good = uniforms[i, 2 * t + 1] < p
                    nxt = U_bar if good else U_bar - x
                else:
                    rec = 1
                    good = uniforms[i, 2 * t + 1] < q
                    nxt = U
            elif U >= U_P:
                rec = 0
                good = uniforms[i, 2 * t + 1] < p
                ug = (U - base) / delta
                nxt = ug if good else ug - x
            else:
                if uniforms[i, 2 * t] < U / U_P:
                    rec = 0
                    good = uniforms[i, 2 * t + 1] < p
                    nxt = x if good else 0.0
                else:
                    rec = 2
                    good = False
                    nxt = 0.0
            if rec == 0:
                u_pay = w
            elif rec == 1:
                u_pay = w + r
            else:
                u_pay = 0.0
            if rec == 2:
                v_pay = 0.0
                acc = 0.0
                out = 2
            else:
                v_pay = g if good else b
                acc = 1.0
                out = 0 if good else 1
            if i < n_record:
                U_path[i, t] = U
                rec_path[i, t] = rec
                out_path[i, t] = out
            sw += disc * u_pay
            sc += disc * v_pay
            sa += disc * acc
            disc *= delta
            if nxt < 0.0:
                nxt = 0.0
            if nxt > U_bar:
                nxt = U_bar
            U = nxt
        worker[i] = (1 - delta) * sw
        client[i] = (1 - delta) * sc
        accept[i] = (1 - delta) * sa
    return {
        "worker": worker_arr,
        "client": client_arr,
        "accept": accept_arr,
        "absorb": absorb_arr,
        "U": U_rec,
        "rec": rec_rec,
        "out": out_rec,
    }
