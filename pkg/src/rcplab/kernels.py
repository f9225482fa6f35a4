"""Jitted inner loops.

Two families of kernels coexist:

* event-sweep kernels that replay a pre-built, time-sorted event table
  (cure marks and transmission arrows) -- the graphical-structure path,
  which supports pathwise thinning couplings via per-arrow levels;
* Gillespie-style kernels that race the fixed renewal cure marks against
  on-demand exponential transmission clocks -- exact in law for a single
  run, and the only practical route when the transmission rate is so
  large that materializing every arrow is hopeless.

If numba is unavailable the same code runs as plain Python (slow but
correct); nothing else in the package changes.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


_JIT = dict(cache=True, nogil=True) if HAVE_NUMBA else {}

# law kind codes, kept in sync with laws.kernel_params()
KIND_EXP, KIND_WEIBULL, KIND_UNIFORM, KIND_PARETO, KIND_DET, KIND_EMPIRICAL = range(6)

# sweep outcome status codes
RAN_TO_END, EXTINCT, STOPPED = 0, 1, 2


@njit(**_JIT)
def _draw_gap(kind, p1, p2, aux):
    u = np.random.random()
    if kind == 0:  # exponential(rate=p1)
        return -np.log(1.0 - u) / p1
    if kind == 1:  # weibull(shape=p1, scale=p2)
        return p2 * (-np.log(1.0 - u)) ** (1.0 / p1)
    if kind == 2:  # uniform on [0, p1]
        return p1 * u
    if kind == 3:  # pareto(alpha=p1, xmin=p2)
        return p2 * (1.0 - u) ** (-1.0 / p1)
    if kind == 4:  # point mass at p1
        return p1
    # empirical resample
    idx = int(u * aux.shape[0])
    if idx >= aux.shape[0]:
        idx = aux.shape[0] - 1
    return aux[idx]


@njit(**_JIT)
def _draw_residual(res_xs, res_cdf):
    u = np.random.random()
    n = res_cdf.shape[0]
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if res_cdf[mid] <= u:
            lo = mid
        else:
            hi = mid
    c0, c1 = res_cdf[lo], res_cdf[hi]
    if c1 <= c0:
        return res_xs[lo]
    f = (u - c0) / (c1 - c0)
    return res_xs[lo] + f * (res_xs[hi] - res_xs[lo])


# ---------------------------------------------------------------------------
# event-sweep kernels over pre-built tables
# ---------------------------------------------------------------------------


@njit(**_JIT)
def sweep_outcome(times, kind, a, b, level, lam_thr, start_idx, t_end,
                  infected, count, full, stop_site, cure_pos):
    """Replay the table from start_idx; returns (status, time, count).

    Arrows with level > lam_thr are skipped (thinning).  When the window
    saturates, the index jumps straight to the next cure event, which is
    exact because arrows cannot change a fully infected window.
    """
    n = times.shape[0]
    ncp = cure_pos.shape[0]
    cp = np.searchsorted(cure_pos, start_idx)
    i = start_idx
    while i < n:
        t = times[i]
        if t > t_end:
            break
        if kind[i] == 0:
            s = a[i]
            if infected[s]:
                infected[s] = False
                count -= 1
                if count == 0:
                    return EXTINCT, t, 0
        else:
            if level[i] <= lam_thr:
                if infected[a[i]] and not infected[b[i]]:
                    infected[b[i]] = True
                    count += 1
                    if b[i] == stop_site:
                        return STOPPED, t, count
        i += 1
        if count == full and i < n:
            while cp < ncp and cure_pos[cp] < i:
                cp += 1
            if cp < ncp:
                i = cure_pos[cp]
            else:
                break
    return RAN_TO_END, t_end, count


@njit(**_JIT)
def sweep_trajectory(times, kind, a, b, level, lam_thr, start_idx, t_end,
                     infected, count, t0, rec_t, rec_c, rec_l, rec_r):
    """Replay while recording (time, count, leftmost, rightmost) after every
    state change.  Returns (status, time, count, rows_written)."""
    ns = infected.shape[0]
    lo, hi = ns, -1
    for s in range(ns):
        if infected[s]:
            if s < lo:
                lo = s
            if s > hi:
                hi = s
    m = 0
    rec_t[m] = t0
    rec_c[m] = count
    rec_l[m] = lo
    rec_r[m] = hi
    m += 1
    n = times.shape[0]
    i = start_idx
    while i < n:
        t = times[i]
        if t > t_end:
            break
        changed = False
        if kind[i] == 0:
            s = a[i]
            if infected[s]:
                infected[s] = False
                count -= 1
                changed = True
                if count == 0:
                    lo, hi = ns, -1
                else:
                    if s == lo:
                        while lo < ns and not infected[lo]:
                            lo += 1
                    if s == hi:
                        while hi >= 0 and not infected[hi]:
                            hi -= 1
        else:
            if level[i] <= lam_thr and infected[a[i]] and not infected[b[i]]:
                s = b[i]
                infected[s] = True
                count += 1
                changed = True
                if s < lo:
                    lo = s
                if s > hi:
                    hi = s
        if changed:
            rec_t[m] = t
            rec_c[m] = count
            rec_l[m] = lo
            rec_r[m] = hi
            m += 1
            if count == 0:
                return EXTINCT, t, 0, m
        i += 1
    return RAN_TO_END, t_end, count, m


@njit(**_JIT)
def sweep_masks(times, kind, a, b, level, lam_thr, start_idx, t_end,
                infected, count, snap_times, out_masks):
    """Replay, copying the infected mask at each requested snapshot time.
    A snapshot at time s reflects all events with time <= s."""
    n = times.shape[0]
    ns = snap_times.shape[0]
    j = 0
    i = start_idx
    status = RAN_TO_END
    t_final = t_end
    while i < n:
        t = times[i]
        if t > t_end:
            break
        while j < ns and snap_times[j] < t:
            out_masks[j, :] = infected
            j += 1
        if kind[i] == 0:
            s = a[i]
            if infected[s]:
                infected[s] = False
                count -= 1
                if count == 0:
                    status = EXTINCT
                    t_final = t
                    i += 1
                    break
        else:
            if level[i] <= lam_thr and infected[a[i]] and not infected[b[i]]:
                infected[b[i]] = True
                count += 1
        i += 1
    while j < ns:
        out_masks[j, :] = infected
        j += 1
    return status, t_final, count


@njit(**_JIT)
def sweep_intervals(times, kind, a, b, level, lam_thr, start_idx, t_end,
                    infected, count, t0, out_site, out_s, out_e):
    """Replay, emitting one (site, start, end) row per infection episode.
    Episodes still open at the end are closed at t_end."""
    ns = infected.shape[0]
    open_at = np.full(ns, np.nan)
    for s in range(ns):
        if infected[s]:
            open_at[s] = t0
    m = 0
    n = times.shape[0]
    i = start_idx
    t_final = t_end
    status = RAN_TO_END
    while i < n:
        t = times[i]
        if t > t_end:
            break
        if kind[i] == 0:
            s = a[i]
            if infected[s]:
                infected[s] = False
                count -= 1
                out_site[m] = s
                out_s[m] = open_at[s]
                out_e[m] = t
                m += 1
                open_at[s] = np.nan
                if count == 0:
                    status = EXTINCT
                    t_final = t
                    break
        else:
            if level[i] <= lam_thr and infected[a[i]] and not infected[b[i]]:
                s = b[i]
                infected[s] = True
                count += 1
                open_at[s] = t
        i += 1
    for s in range(ns):
        if not np.isnan(open_at[s]):
            out_site[m] = s
            out_s[m] = open_at[s]
            out_e[m] = t_final
            m += 1
    return status, t_final, count, m


# ---------------------------------------------------------------------------
# Gillespie-style dynamics with on-demand transmission clocks
# ---------------------------------------------------------------------------


@njit(**_JIT)
def _heap_push(hq_t, hq_s, hn, t, s):
    i = hn
    hq_t[i] = t
    hq_s[i] = s
    while i > 0:
        p = (i - 1) // 2
        if hq_t[p] <= hq_t[i]:
            break
        hq_t[p], hq_t[i] = hq_t[i], hq_t[p]
        hq_s[p], hq_s[i] = hq_s[i], hq_s[p]
        i = p
    return hn + 1


@njit(**_JIT)
def _heap_pop(hq_t, hq_s, hn):
    t = hq_t[0]
    s = hq_s[0]
    hn -= 1
    hq_t[0] = hq_t[hn]
    hq_s[0] = hq_s[hn]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        sm = i
        if l < hn and hq_t[l] < hq_t[sm]:
            sm = l
        if r < hn and hq_t[r] < hq_t[sm]:
            sm = r
        if sm == i:
            break
        hq_t[sm], hq_t[i] = hq_t[i], hq_t[sm]
        hq_s[sm], hq_s[i] = hq_s[i], hq_s[sm]
        i = sm
    return t, s, hn


@njit(**_JIT)
def _edge_on(act_ids, act_pos, k_act, e):
    if act_pos[e] < 0:
        act_ids[k_act] = e
        act_pos[e] = k_act
        k_act += 1
    return k_act

@njit(**_JIT)
def _edge_off(act_ids, act_pos, k_act, e):
    p = act_pos[e]
    if p >= 0:
        k_act -= 1
        last = act_ids[k_act]
        act_ids[p] = last
        act_pos[last] = p
        act_pos[e] = -1
    return k_act


@njit(**_JIT)
def _next_cure_ondemand(cursor, site, after, strict, kind, p1, p2, aux):
    """First renewal epoch of `site` past `after`, generating lazily."""
    c = cursor[site]
    if strict:
        while c <= after:
            c += _draw_gap(kind, p1, p2, aux)
    else:
        while c < after:
            c += _draw_gap(kind, p1, p2, aux)
    cursor[site] = c
    return c


@njit(**_JIT)
def gillespie_run(kind, p1, p2, aux, res_xs, res_cdf, tau_mode, tau_a, taus,
                  lam, n_sites, t0, t_end, init_sites, stop_site,
                  infected, cursor, act_ids, act_pos, hq_t, hq_s):
    """One dynamics run on sites 0..n_sites-1 over [t0, t_end].

    tau_mode: 0 fixed offsets (taus), 1 stationary residual start, 2 iid
    uniform on [-tau_a, 0].  Returns (status, time, count); status as in
    the sweep kernels.
    """
    # cure cursors: position after the first interarrival from tau
    for s in range(n_sites):
        if tau_mode == 1:
            cursor[s] = _draw_residual(res_xs, res_cdf)
        else:
            tau = taus[s] if tau_mode == 0 else -tau_a * np.random.random()
            cursor[s] = tau + _draw_gap(kind, p1, p2, aux)
    for s in range(n_sites):
        infected[s] = False
        act_pos[2 * s] = -1
        act_pos[2 * s + 1] = -1
    k_act = 0
    hn = 0
    count = 0
    for j in range(init_sites.shape[0]):
        y = init_sites[j]
        if infected[y]:
            continue
        infected[y] = True
        count += 1
        # initial sites can be hit by a cure mark at exactly t0
        tc = _next_cure_ondemand(cursor, y, t0, False, kind, p1, p2, aux)
        hn = _heap_push(hq_t, hq_s, hn, tc, y)
        for d in range(2):
            z = y - 1 if d == 0 else y + 1
            if 0 <= z < n_sites:
                if infected[z]:
                    k_act = _edge_off(act_ids, act_pos, k_act, 2 * z + (1 - d))
                else:
                    k_act = _edge_on(act_ids, act_pos, k_act, 2 * y + d)
    now = t0
    while True:
        if hn > 0:
            t_cure = hq_t[0]
        else:
            t_cure = np.inf
        if k_act > 0 and lam > 0.0:
            t_arr = now - np.log(1.0 - np.random.random()) / (lam * k_act)
        else:
            t_arr = np.inf
        if t_arr < t_cure:
            if t_arr > t_end:
                return RAN_TO_END, t_end, count
            now = t_arr
            e = act_ids[int(np.random.random() * k_act) % k_act]
            y = e // 2
            z = y - 1 if e % 2 == 0 else y + 1
            infected[z] = True
            count += 1
            tc = _next_cure_ondemand(cursor, z, now, True, kind, p1, p2, aux)
            hn = _heap_push(hq_t, hq_s, hn, tc, z)
            for d in range(2):
                w = z - 1 if d == 0 else z + 1
                if 0 <= w < n_sites:
                    if infected[w]:
                        k_act = _edge_off(act_ids, act_pos, k_act, 2 * w + (1 - d))
                    else:
                        k_act = _edge_on(act_ids, act_pos, k_act, 2 * z + d)
            k_act = _edge_off(act_ids, act_pos, k_act, e)
            if z == stop_site:
                return STOPPED, now, count
        else:
            if t_cure > t_end or hn == 0:
                return RAN_TO_END, t_end, count
            t, x, hn = _heap_pop(hq_t, hq_s, hn)
            now = t
            infected[x] = False
            count -= 1
            if count == 0:
                return EXTINCT, now, count
            for d in range(2):
                z = x - 1 if d == 0 else x + 1
                if 0 <= z < n_sites:
                    if infected[z]:
                        k_act = _edge_on(act_ids, act_pos, k_act, 2 * z + (1 - d))
                    else:
                        k_act = _edge_off(act_ids, act_pos, k_act, 2 * x + d)


@njit(**_JIT)
def gillespie_batch(kind, p1, p2, aux, res_xs, res_cdf, tau_mode, tau_a, taus,
                    lam, n_sites, t_end, init_sites, seeds):
    """Replicated runs; returns (survived bool, extinction time or nan)."""
    n = seeds.shape[0]
    survived = np.zeros(n, np.bool_)
    ext = np.full(n, np.nan)
    infected = np.zeros(n_sites, np.bool_)
    cursor = np.zeros(n_sites)
    act_ids = np.zeros(2 * n_sites, np.int32)
    act_pos = np.full(2 * n_sites, -1, np.int32)
    cap = 4 * n_sites + 64
    hq_t = np.zeros(cap)
    hq_s = np.zeros(cap, np.int32)
    for i in range(n):
        np.random.seed(seeds[i])
        status, t, _ = gillespie_run(
            kind, p1, p2, aux, res_xs, res_cdf, tau_mode, tau_a, taus,
            lam, n_sites, 0.0, t_end, init_sites, -1,
            infected, cursor, act_ids, act_pos, hq_t, hq_s,
        )
        if status == EXTINCT:
            ext[i] = t
        else:
            survived[i] = True
    return survived, ext


@njit(**_JIT)
def box_cross_batch(kind, p1, p2, aux, res_xs, res_cdf, tau_mode, tau_a, taus,
                    lam, n_sites, t0, t1, start_local, goal_local, seeds):
    """Crossing indicators for replicated boxes.

    goal_local >= 0: horizontal semantics, True iff the goal site gets
    infected inside the box.  goal_local < 0: vertical semantics, True
    iff infection is still alive at the box top.
    """
    n = seeds.shape[0]
    hit = np.zeros(n, np.bool_)
    infected = np.zeros(n_sites, np.bool_)
    cursor = np.zeros(n_sites)
    act_ids = np.zeros(2 * n_sites, np.int32)
    act_pos = np.full(2 * n_sites, -1, np.int32)
    cap = 4 * n_sites + 64
    hq_t = np.zeros(cap)
    hq_s = np.zeros(cap, np.int32)
    init = np.empty(1, np.int64)
    init[0] = start_local
    for i in range(n):
        np.random.seed(seeds[i])
        status, t, _ = gillespie_run(
            kind, p1, p2, aux, res_xs, res_cdf, tau_mode, tau_a, taus,
            lam, n_sites, t0, t1, init, goal_local,
            infected, cursor, act_ids, act_pos, hq_t, hq_s,
        )
        if goal_local >= 0:
            hit[i] = status == STOPPED
        else:
            hit[i] = status == RAN_TO_END
    return hit


# ---------------------------------------------------------------------------
# block fields from shared cure trains
# ---------------------------------------------------------------------------


@njit(**_JIT)
def _box_from_trains(marks, off, s0, n_loc, lam, t0, t1, start_local, goal_local,
                     infected, nxt_ptr, act_ids, act_pos, hq_t, hq_s):
    """Box dynamics reading cure marks from shared per-site trains; the
    transmission arrows are drawn on demand from the thread RNG."""
    for s in range(n_loc):
        infected[s] = False
        act_pos[2 * s] = -1
        act_pos[2 * s + 1] = -1
        g = s0 + s
        lo = off[g]
        hi = off[g + 1]
        # first mark at or after t0
        while lo < hi and marks[lo] < t0:
            lo += 1
        nxt_ptr[s] = lo
    k_act = 0
    hn = 0
    count = 1
    infected[start_local] = True
    g = s0 + start_local
    if nxt_ptr[start_local] < off[g + 1]:
        hn = _heap_push(hq_t, hq_s, hn, marks[nxt_ptr[start_local]], start_local)
    for d in range(2):
        z = start_local - 1 if d == 0 else start_local + 1
        if 0 <= z < n_loc:
            k_act = _edge_on(act_ids, act_pos, k_act, 2 * start_local + d)
    now = t0
    while True:
        if hn > 0:
            t_cure = hq_t[0]
        else:
            t_cure = np.inf
        if k_act > 0 and lam > 0.0:
            t_arr = now - np.log(1.0 - np.random.random()) / (lam * k_act)
        else:
            t_arr = np.inf
        if t_arr < t_cure:
            if t_arr > t1:
                return goal_local < 0
            now = t_arr
            e = act_ids[int(np.random.random() * k_act) % k_act]
            y = e // 2
            z = y - 1 if e % 2 == 0 else y + 1
            infected[z] = True
            count += 1
            gz = s0 + z
            p = nxt_ptr[z]
            hi = off[gz + 1]
            while p < hi and marks[p] <= now:
                p += 1
            nxt_ptr[z] = p
            if p < hi:
                hn = _heap_push(hq_t, hq_s, hn, marks[p], z)
            for d in range(2):
                w = z - 1 if d == 0 else z + 1
                if 0 <= w < n_loc:
                    if infected[w]:
                        k_act = _edge_off(act_ids, act_pos, k_act, 2 * w + (1 - d))
                    else:
                        k_act = _edge_on(act_ids, act_pos, k_act, 2 * z + d)
            k_act = _edge_off(act_ids, act_pos, k_act, e)
            if z == goal_local:
                return True
        else:
            if t_cure > t1 or hn == 0:
                return goal_local < 0
            t, x, hn = _heap_pop(hq_t, hq_s, hn)
            now = t
            infected[x] = False
            count -= 1
            if count == 0:
                return False
            # cure pointer stays put; it re-advances on re-infection
            for d in range(2):
                z = x - 1 if d == 0 else x + 1
                if 0 <= z < n_loc:
                    if infected[z]:
                        k_act = _edge_on(act_ids, act_pos, k_act, 2 * z + (1 - d))
                    else:
                        k_act = _edge_off(act_ids, act_pos, k_act, 2 * x + d)


@njit(**_JIT)
def field_boxwise(marks, off, lam, bounded, b, n_cols, n_rows, seed,
                  h_open, v_open):
    """Fill one replica's block field from shared cure trains.

    bounded=True: horizontal boxes [2x,2x+3] x [2yb, 2yb+b], vertical
    boxes [2x,2x+1] x [2yb, 2yb+3b].  Otherwise the decreasing-hazard
    scheme: [2x,2x+3] x [y, y+0.3] and [2x,2x+1] x [y, y+1].  Arrows are
    drawn independently per box; cure trains are shared exactly.
    """
    np.random.seed(seed)
    infected = np.zeros(4, np.bool_)
    nxt_ptr = np.zeros(4, np.int64)
    act_ids = np.zeros(8, np.int32)
    act_pos = np.full(8, -1, np.int32)
    hq_t = np.zeros(80)
    hq_s = np.zeros(80, np.int32)
    for y in range(n_rows):
        for x in range(n_cols):
            if x > y + 1:
                h_open[y, x] = False
                v_open[y, x] = False
                continue
            if bounded:
                th = 2.0 * y * b
                hh = b
                tv = 2.0 * y * b
                hv = 3.0 * b
            else:
                th = float(y)
                hh = 0.3
                tv = float(y)
                hv = 1.0
            h_open[y, x] = _box_from_trains(
                marks, off, 2 * x, 4, lam, th, th + hh, 0, 3,
                infected, nxt_ptr, act_ids, act_pos, hq_t, hq_s)
            v_open[y, x] = _box_from_trains(
                marks, off, 2 * x, 2, lam, tv, tv + hv, 0, -1,
                infected, nxt_ptr, act_ids, act_pos, hq_t, hq_s)


@njit(**_JIT)
def percolation_depth(h_open, v_open, depth):
    """True iff an open oriented path inside the wedge 0 <= x <= y+1 links
    (0,0) to second coordinate `depth`.  Edges go +x and +y only, so one
    bottom-up row sweep decides reachability."""
    n_rows, n_cols = h_open.shape
    if depth > n_rows:
        return False
    reach = np.zeros(n_cols, np.bool_)
    reach[0] = True
    for y in range(depth):
        # horizontal closure within row y (edges (x,y)->(x+1,y))
        for x in range(n_cols - 1):
            if reach[x] and h_open[y, x] and (x + 1) <= y + 1:
                reach[x + 1] = True
        if y == depth - 1:
            for x in range(n_cols):
                if reach[x] and x <= y + 1 and v_open[y, x]:
                    return True
            return False
        nxt = np.zeros(n_cols, np.bool_)
        for x in range(n_cols):
            if reach[x] and x <= y + 1 and v_open[y, x]:
                nxt[x] = True
        reach = nxt
        if not reach.any():
            return False
    return depth == 0
