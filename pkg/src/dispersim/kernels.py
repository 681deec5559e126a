"""Hot-loop kernels.

Every function here is written in a numba-compatible array style and compiled
with ``@njit(cache=True)`` when numba is available.  Setting the environment
variable ``DISPERSIM_NO_NUMBA=1`` (or a missing numba install) selects the
pure-Python/numpy fallback path: the same functions run uncompiled, and the
TASEP driver switches to a vectorized numpy row update.  Both paths produce
bit-identical results; ``benchmarks/bench_kernels.py`` compares their speed.

State lives in plain numpy arrays allocated by the wrappers in ``engine``;
scalar run state is packed into an int64 ``ictrl`` and a float64 ``fctrl``
array so kernels can be suspended and resumed (pool refills, log growth).
"""

import os

import numpy as np

_env_flag = os.environ.get("DISPERSIM_NO_NUMBA", "")
NUMBA_REQUESTED = _env_flag in ("", "0")
if NUMBA_REQUESTED:
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def maybe_njit(func):
        return _njit(cache=True)(func)

else:

    def maybe_njit(func):
        return func


# -- shared constants --------------------------------------------------------

# robot lifecycle codes
UNMAT = 0
OUTSIDE = 1
MOBILE = 2
SETTLED = 3
GONE = 4

# event kinds
K_ACT = 0
K_DEL = 1

# environment variant codes
V_FINITE = 0
V_INF_PLAIN = 2
V_INF_PRE = 3
V_TASEP_B = 4

# decide() actions
A_STAY = 0
A_MOVE = 1
A_SETTLE = 2
A_ERR = -1

# change-log row codes
C_ENTER_M = 1
C_ENTER_S = 2
C_MOVE = 3
C_SETTLE = 4
C_DELETE = 5
C_SLOW = 6
C_ALL_SLOW = 7

# deletion "prior state" codes stored in the change-log value column
D_OUTSIDE = 1
D_MOBILE = 2
D_SETTLED = 3

# adversary policy codes
P_NONE = 0
P_RANDOM = 1
P_EAGER = 2
P_SCRIPTED = 3

# settled dummy marker (prefilled variants)
DUMMY = -1

# kernel status codes
S_OK = 0
S_NEED_POOL = 1
S_NEED_EVCAP = 2
S_DONE_HORIZON = 3
S_DONE_SLOW = 4
S_NEED_CHCAP = 5
E_TRUNC = -1
E_CAPACITY = -2
E_VERTEX_OVERFLOW = -3
E_LOGCAP = -4

# ictrl slots
I_M = 0  # materialized robot count
I_NEXTG = 1  # next robot index to materialize / next unmapped (replay)
I_EVN = 2  # events logged / processed
I_CHN = 3  # change rows written
I_SETTLED = 4
I_SLOWV = 5  # slow vertex count
I_ENTERED = 6
I_CRASHED = 7  # crash/deletion events applied
I_PEXP = 8  # exponential pool pointer
I_PUNI = 9  # uniform pool pointer
I_MOBILE_ALONE = 10  # mobile robot left without a settled robot under it
I_CAPVIOL = 11  # capacity violations (must stay 0)
I_SLOWVIOL = 12  # moves/deletions touching robots at slow vertices
I_DEL_SETTLED = 13  # deletions that removed a settled robot
I_DEL_OUTSIDE = 14  # deletions of robots still outside
I_STEP = 15  # sync: current step
I_CROSSN = 16  # B: crossings recorded
I_DFSCONF = 17  # sync: same-target attempts within one step
I_DEL_BLOCKED = 18  # replay: deletions that did not coincide with an attempt
N_ICTRL = 19

# fctrl slots
F_T = 0
F_MAKESPAN = 1
F_SLOWMK = 2
N_FCTRL = 3

NCHECKS = 8  # coupling checker verdict slots
CHK_A = 0
CHK_B = 1
CHK_L4 = 2
CHK_L5 = 3
CHK_L6 = 4
CHK_INEQ4 = 5
CHK_PROP1 = 6
CHK_L2 = 7


# -- local rule --------------------------------------------------------------


@maybe_njit
def _decide(v, variant, V, adj_indptr, adj_indices, v_settled, v_mobile, r_mark):
    """Algorithm decision for a mobile robot at vertex index v.

    Branch 1: move to the lowest-id neighbor holding exactly one robot that
    marks v.  Branch 2: settle at the lowest-id empty neighbor.  Else stay.
    """
    if variant == V_FINITE:
        lo = adj_indptr[v]
        hi = adj_indptr[v + 1]
        for kk in range(lo, hi):
            u = adj_indices[kk]
            s = v_settled[u]
            if s != 0 and v_mobile[u] == 0:
                mk = u - 1 if s == DUMMY else r_mark[s]
                if mk == v:
                    return A_MOVE, u
        for kk in range(lo, hi):
            u = adj_indices[kk]
            if v_settled[u] == 0 and v_mobile[u] == 0:
                return A_SETTLE, u
        return A_STAY, 0
    # lazy path variants: neighbors are v-1 and v+1 in index space
    if v + 1 >= V:
        return A_ERR, 0
    u = v - 1
    if u >= 1:
        s = v_settled[u]
        if s != 0 and v_mobile[u] == 0:
            mk = u - 1 if s == DUMMY else r_mark[s]
            if mk == v:
                return A_MOVE, u
    u = v + 1
    s = v_settled[u]
    if s != 0 and v_mobile[u] == 0:
        mk = u - 1 if s == DUMMY else r_mark[s]
        if mk == v:
            return A_MOVE, u
    u = v - 1
    if u >= 1 and v_settled[u] == 0 and v_mobile[u] == 0:
        return A_SETTLE, u
    u = v + 1
    if v_settled[u] == 0 and v_mobile[u] == 0:
        return A_SETTLE, u
    return A_STAY, 0


@maybe_njit
def _decide_rand(v, adj_indptr, adj_indices, v_settled, v_mobile, r_mark, u_tie):
    """Seeded-random tie-break variant of the decision (finite envs only)."""
    lo = adj_indptr[v]
    hi = adj_indptr[v + 1]
    cnt = 0
    for kk in range(lo, hi):
        u = adj_indices[kk]
        s = v_settled[u]
        if s != 0 and v_mobile[u] == 0 and r_mark[s] == v:
            cnt += 1
    if cnt > 0:
        pick = int(u_tie * cnt)
        if pick >= cnt:
            pick = cnt - 1
        for kk in range(lo, hi):
            u = adj_indices[kk]
            s = v_settled[u]
            if s != 0 and v_mobile[u] == 0 and r_mark[s] == v:
                if pick == 0:
                    return A_MOVE, u
                pick -= 1
    cnt = 0
    for kk in range(lo, hi):
        u = adj_indices[kk]
        if v_settled[u] == 0 and v_mobile[u] == 0:
            cnt += 1
    if cnt > 0:
        pick = int(u_tie * cnt)
        if pick >= cnt:
            pick = cnt - 1
        for kk in range(lo, hi):
            u = adj_indices[kk]
            if v_settled[u] == 0 and v_mobile[u] == 0:
                if pick == 0:
                    return A_SETTLE, u
                pick -= 1
    return A_STAY, 0


# -- adversary ---------------------------------------------------------------


@maybe_njit
def _budget(c, t, divisor):
    return int(c * t / divisor)


@maybe_njit
def _script_match(t, robot, sc_tmin, sc_tmax, sc_robot):
    for j in range(sc_tmin.shape[0]):
        if sc_robot[j] == robot and sc_tmin[j] <= t <= sc_tmax[j]:
            return True
    return False


# -- state transition helpers -------------------------------------------------


@maybe_njit
def _log_change(eidx, r, code, val, ch_e, ch_r, ch_c, ch_v, ictrl):
    k = ictrl[I_CHN]
    if k >= ch_e.shape[0]:
        return False
    ch_e[k] = eidx
    ch_r[k] = r
    ch_c[k] = code
    ch_v[k] = val
    ictrl[I_CHN] = k + 1
    return True


@maybe_njit
def _slow_cascade(
    v,
    t,
    eidx,
    n,
    track_slow,
    v_blocked,
    v_slowat,
    v_parent,
    v_nchild,
    v_nslowch,
    v_settled,
    v_mobile,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    ictrl,
    fctrl,
):
    """Mark v slow if eligible, then re-examine ancestors up the tree."""
    if track_slow == 0:
        return True
    cur = v
    while cur > 0:
        if v_slowat[cur] >= 0.0:
            break
        if v_blocked[cur] < 0.0:
            break
        if v_nslowch[cur] != v_nchild[cur]:
            break
        v_slowat[cur] = t
        ictrl[I_SLOWV] += 1
        if log_changes == 1:
            sr = v_settled[cur]
            if sr > 0:
                if not _log_change(eidx, sr, C_SLOW, cur, ch_e, ch_r, ch_c, ch_v, ictrl):
                    return False
            mr = v_mobile[cur]
            if mr > 0:
                if not _log_change(eidx, mr, C_SLOW, cur, ch_e, ch_r, ch_c, ch_v, ictrl):
                    return False
        if ictrl[I_SLOWV] == n and fctrl[F_SLOWMK] < 0.0:
            fctrl[F_SLOWMK] = t
            if log_changes == 1:
                if not _log_change(eidx, 0, C_ALL_SLOW, 0, ch_e, ch_r, ch_c, ch_v, ictrl):
                    return False
        p = v_parent[cur]
        if p > 0:
            v_nslowch[p] += 1
            cur = p
        else:
            break
    return True


@maybe_njit
def _apply_blocked(
    r,
    t,
    eidx,
    n,
    track_slow,
    r_loc,
    v_blocked,
    v_slowat,
    v_parent,
    v_nchild,
    v_nslowch,
    v_settled,
    v_mobile,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    ictrl,
    fctrl,
):
    v = r_loc[r]
    v_blocked[v] = t
    return _slow_cascade(
        v, t, eidx, n, track_slow, v_blocked, v_slowat, v_parent, v_nchild,
        v_nslowch, v_settled, v_mobile, log_changes, ch_e, ch_r, ch_c, ch_v,
        ictrl, fctrl,
    )


@maybe_njit
def _apply_move(
    r,
    u,
    t,
    eidx,
    variant,
    cross_idx,
    r_loc,
    r_depth,
    v_settled,
    v_mobile,
    v_blocked,
    v_slowat,
    cross_t,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    ictrl,
):
    v = r_loc[r]
    if v_slowat[v] >= 0.0:
        ictrl[I_SLOWVIOL] += 1
    if v_mobile[u] != 0:
        ictrl[I_CAPVIOL] += 1
        return True
    v_mobile[v] = 0
    v_blocked[v] = -1.0
    v_mobile[u] = r
    r_loc[r] = u
    r_depth[r] += 1
    if v_settled[u] == 0:
        ictrl[I_MOBILE_ALONE] += 1
    if variant == V_TASEP_B and u == cross_idx:
        cross_t[ictrl[I_CROSSN]] = t
        ictrl[I_CROSSN] += 1
    if log_changes == 1:
        return _log_change(eidx, r, C_MOVE, r_depth[r], ch_e, ch_r, ch_c, ch_v, ictrl)
    return True


@maybe_njit
def _apply_settle(
    r,
    u,
    t,
    eidx,
    n,
    r_state,
    r_loc,
    r_depth,
    r_mark,
    v_settled,
    v_mobile,
    v_blocked,
    v_slowat,
    v_parent,
    v_nchild,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    ictrl,
    fctrl,
):
    v = r_loc[r]
    if v_slowat[v] >= 0.0:
        ictrl[I_SLOWVIOL] += 1
    if v_settled[u] != 0 or v_mobile[u] != 0:
        ictrl[I_CAPVIOL] += 1
        return True
    v_mobile[v] = 0
    v_blocked[v] = -1.0
    v_settled[u] = r
    r_state[r] = SETTLED
    r_loc[r] = u
    r_depth[r] += 1
    r_mark[r] = v
    v_parent[u] = v
    v_nchild[v] += 1
    ictrl[I_SETTLED] += 1
    if n > 0 and ictrl[I_SETTLED] == n and fctrl[F_MAKESPAN] < 0.0:
        fctrl[F_MAKESPAN] = t
    if log_changes == 1:
        return _log_change(eidx, r, C_SETTLE, r_depth[r], ch_e, ch_r, ch_c, ch_v, ictrl)
    return True


@maybe_njit
def _enter_robot(
    r,
    s,
    t,
    eidx,
    n,
    r_state,
    r_loc,
    r_depth,
    r_mark,
    v_settled,
    v_mobile,
    v_parent,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    ictrl,
    fctrl,
):
    """Entrance of the lowest-index outside robot; caller checked mobile-free."""
    ictrl[I_ENTERED] += 1
    if v_settled[s] == 0:
        v_settled[s] = r
        r_state[r] = SETTLED
        r_loc[r] = s
        r_depth[r] = 1
        r_mark[r] = 0
        v_parent[s] = -1
        ictrl[I_SETTLED] += 1
        if n > 0 and ictrl[I_SETTLED] == n and fctrl[F_MAKESPAN] < 0.0:
            fctrl[F_MAKESPAN] = t
        if log_changes == 1:
            return _log_change(eidx, r, C_ENTER_S, 1, ch_e, ch_r, ch_c, ch_v, ictrl)
        return True
    v_mobile[s] = r
    r_state[r] = MOBILE
    r_loc[r] = s
    r_depth[r] = 1
    if log_changes == 1:
        return _log_change(eidx, r, C_ENTER_M, 1, ch_e, ch_r, ch_c, ch_v, ictrl)
    return True


@maybe_njit
def _delete_robot(
    r,
    eidx,
    r_state,
    r_loc,
    v_settled,
    v_mobile,
    v_blocked,
    v_slowat,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    ictrl,
):
    st = r_state[r]
    r_state[r] = GONE
    ictrl[I_CRASHED] += 1
    if st == MOBILE:
        v = r_loc[r]
        if v_slowat[v] >= 0.0:
            ictrl[I_SLOWVIOL] += 1
        v_mobile[v] = 0
        v_blocked[v] = -1.0
        code = D_MOBILE
    elif st == SETTLED:
        v = r_loc[r]
        ictrl[I_DEL_SETTLED] += 1
        if v_slowat[v] >= 0.0:
            ictrl[I_SLOWVIOL] += 1
        v_settled[v] = 0
        ictrl[I_SETTLED] -= 1
        if v_mobile[v] != 0:
            ictrl[I_MOBILE_ALONE] += 1
        code = D_SETTLED
    else:  # OUTSIDE or UNMAT: deleted before entering
        ictrl[I_DEL_OUTSIDE] += 1
        code = D_OUTSIDE
    if log_changes == 1:
        return _log_change(eidx, r, C_DELETE, code, ch_e, ch_r, ch_c, ch_v, ictrl)
    return True


# -- generative run (async) ---------------------------------------------------


@maybe_njit
def _generate_async(
    variant,
    n,
    V,
    adj_indptr,
    adj_indices,
    src_idx,
    K,
    c,
    pol_kind,
    pol_p,
    divisor,
    horizon,
    tiebreak,
    stop_at_slow,
    sc_tmin,
    sc_tmax,
    sc_robot,
    exp_pool,
    uni_pool,
    ev_t,
    ev_r,
    ev_k,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    r_state,
    r_loc,
    r_depth,
    r_mark,
    r_src,
    v_settled,
    v_mobile,
    v_blocked,
    v_slowat,
    v_parent,
    v_nchild,
    v_nslowch,
    src_entrant,
    ictrl,
    fctrl,
):
    """Sample the asynchronous schedule and run the local rule on a finite env.

    Resumable: returns S_NEED_POOL / S_NEED_EVCAP with all state saved so the
    caller can refill pools or grow the log and call again.
    """
    t = fctrl[F_T]
    pool_n = exp_pool.shape[0]
    ev_cap = ev_t.shape[0]
    ch_cap = ch_e.shape[0]
    track_slow = 1
    cross_idx = -1
    cross_t = ev_t  # unused in generative runs
    while True:
        pe = ictrl[I_PEXP]
        pu = ictrl[I_PUNI]
        if pe + 1 >= pool_n or pu + 3 >= pool_n:
            fctrl[F_T] = t
            return S_NEED_POOL
        evn = ictrl[I_EVN]
        if evn >= ev_cap:
            fctrl[F_T] = t
            return S_NEED_EVCAP
        if log_changes == 1 and ictrl[I_CHN] + 2 * n + 8 >= ch_cap:
            fctrl[F_T] = t
            return S_NEED_CHCAP
        M = ictrl[I_M]
        dt = exp_pool[pe]
        ictrl[I_PEXP] = pe + 1
        upick = uni_pool[pu]
        pu += 1
        tnew = t + dt / M
        if tnew > horizon:
            ictrl[I_PUNI] = pu
            fctrl[F_T] = t
            return S_DONE_HORIZON
        t = tnew
        r = 1 + int(upick * M)
        if r > M:
            r = M
        kind = K_ACT
        st = r_state[r]
        if st == OUTSIDE:
            si = r_src[r]
            s = src_idx[si]
            if v_mobile[s] == 0:
                crash = False
                if ictrl[I_CRASHED] + 1 <= _budget(c, t, divisor):
                    if pol_kind == P_RANDOM:
                        crash = uni_pool[pu] < pol_p
                        pu += 1
                    elif pol_kind == P_EAGER:
                        crash = True
                    elif pol_kind == P_SCRIPTED:
                        crash = _script_match(t, r, sc_tmin, sc_tmax, sc_robot)
                if crash:
                    kind = K_DEL
                    if not _delete_robot(
                        r, evn, r_state, r_loc, v_settled, v_mobile, v_blocked,
                        v_slowat, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                    ):
                        ictrl[I_PUNI] = pu
                        fctrl[F_T] = t
                        return E_LOGCAP
                else:
                    if not _enter_robot(
                        r, s, t, evn, n, r_state, r_loc, r_depth, r_mark,
                        v_settled, v_mobile, v_parent, log_changes,
                        ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                    ):
                        ictrl[I_PUNI] = pu
                        fctrl[F_T] = t
                        return E_LOGCAP
                # materialize the next robot for this source
                nr = ictrl[I_NEXTG]
                if nr > K:
                    ictrl[I_PUNI] = pu
                    fctrl[F_T] = t
                    return E_TRUNC
                r_state[nr] = OUTSIDE
                r_src[nr] = si
                src_entrant[si] = nr
                ictrl[I_NEXTG] = nr + 1
                ictrl[I_M] = M + 1
        elif st == MOBILE:
            v = r_loc[r]
            if tiebreak == 1:
                u_tie = uni_pool[pu]
                pu += 1
                act, u = _decide_rand(
                    v, adj_indptr, adj_indices, v_settled, v_mobile, r_mark, u_tie
                )
            else:
                act, u = _decide(
                    v, variant, V, adj_indptr, adj_indices, v_settled, v_mobile, r_mark
                )
            if act == A_STAY:
                if not _apply_blocked(
                    r, t, evn, n, track_slow, r_loc, v_blocked, v_slowat,
                    v_parent, v_nchild, v_nslowch, v_settled, v_mobile,
                    log_changes, ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                ):
                    ictrl[I_PUNI] = pu
                    fctrl[F_T] = t
                    return E_LOGCAP
            else:
                crash = False
                if ictrl[I_CRASHED] + 1 <= _budget(c, t, divisor):
                    if pol_kind == P_RANDOM:
                        crash = uni_pool[pu] < pol_p
                        pu += 1
                    elif pol_kind == P_EAGER:
                        crash = True
                    elif pol_kind == P_SCRIPTED:
                        crash = _script_match(t, r, sc_tmin, sc_tmax, sc_robot)
                ok = True
                if crash:
                    kind = K_DEL
                    ok = _delete_robot(
                        r, evn, r_state, r_loc, v_settled, v_mobile, v_blocked,
                        v_slowat, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                    )
                elif act == A_MOVE:
                    ok = _apply_move(
                        r, u, t, evn, variant, cross_idx, r_loc, r_depth,
                        v_settled, v_mobile, v_blocked, v_slowat, cross_t,
                        log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                    )
                else:
                    ok = _apply_settle(
                        r, u, t, evn, n, r_state, r_loc, r_depth, r_mark,
                        v_settled, v_mobile, v_blocked, v_slowat, v_parent,
                        v_nchild, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                    )
                if not ok:
                    ictrl[I_PUNI] = pu
                    fctrl[F_T] = t
                    return E_LOGCAP
        # settled / gone robots: virtual activation, logged below
        ev_t[evn] = t
        ev_r[evn] = r
        ev_k[evn] = kind
        ictrl[I_EVN] = evn + 1
        ictrl[I_PUNI] = pu
        if ictrl[I_CAPVIOL] > 0:
            fctrl[F_T] = t
            return E_CAPACITY
        if stop_at_slow == 1 and fctrl[F_SLOWMK] >= 0.0:
            fctrl[F_T] = t
            return S_DONE_SLOW


# -- replay -------------------------------------------------------------------


@maybe_njit
def _advance_entrant(si, K, lazy_map, r_state, r_src, src_entrant, ictrl):
    """After the entrant of source si entered or was deleted, find the next one."""
    if lazy_map == 1:
        nm = ictrl[I_NEXTG]
        while nm <= K and r_state[nm] == GONE:
            nm += 1
        if nm <= K and r_state[nm] == UNMAT:
            r_state[nm] = OUTSIDE
            r_src[nm] = si
            src_entrant[si] = nm
            ictrl[I_NEXTG] = nm + 1
        else:
            src_entrant[si] = 0
            ictrl[I_NEXTG] = nm
    else:
        p = src_entrant[si] + 1
        while p <= K and r_state[p] != OUTSIDE:
            p += 1
        src_entrant[si] = p if p <= K else 0


@maybe_njit
def _replay_events(
    variant,
    n,
    V,
    cross_idx,
    track_slow,
    lazy_map,
    adj_indptr,
    adj_indices,
    src_idx,
    K,
    ev_t,
    ev_r,
    ev_k,
    ignore_deletions,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    r_state,
    r_loc,
    r_depth,
    r_mark,
    r_src,
    v_settled,
    v_mobile,
    v_blocked,
    v_slowat,
    v_parent,
    v_nchild,
    v_nslowch,
    src_entrant,
    cross_t,
    ictrl,
    fctrl,
):
    """Deterministically apply a logged event order to an environment.

    Resumable: processing continues from ictrl[I_EVN], so the caller can grow
    the change log on S_NEED_CHCAP and call again.
    """
    E = ev_t.shape[0]
    ch_cap = ch_e.shape[0]
    for e in range(ictrl[I_EVN], E):
        if log_changes == 1 and ictrl[I_CHN] + 2 * n + 8 >= ch_cap:
            return S_NEED_CHCAP
        t = ev_t[e]
        r = ev_r[e]
        if r > K:
            return E_TRUNC
        k = ev_k[e]
        if k == K_DEL and ignore_deletions == 0:
            st = r_state[r]
            if st != GONE:
                si = r_src[r]
                was_entrant = st == OUTSIDE and si >= 0 and src_entrant[si] == r
                # audit: a deletion in a generative order always coincides
                # with a movement attempt (entry or unblocked move)
                if st == MOBILE:
                    act0, _u0 = _decide(
                        r_loc[r], variant, V, adj_indptr, adj_indices,
                        v_settled, v_mobile, r_mark,
                    )
                    if act0 == A_STAY:
                        ictrl[I_DEL_BLOCKED] += 1
                elif st == OUTSIDE:
                    if not (was_entrant and v_mobile[src_idx[si]] == 0):
                        ictrl[I_DEL_BLOCKED] += 1
                else:
                    ictrl[I_DEL_BLOCKED] += 1
                if not _delete_robot(
                    r, e, r_state, r_loc, v_settled, v_mobile, v_blocked,
                    v_slowat, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                ):
                    return E_LOGCAP
                if was_entrant:
                    _advance_entrant(si, K, lazy_map, r_state, r_src, src_entrant, ictrl)
        else:
            st = r_state[r]
            if st == OUTSIDE:
                si = r_src[r]
                s = src_idx[si]
                if src_entrant[si] == r and v_mobile[s] == 0:
                    if not _enter_robot(
                        r, s, t, e, n, r_state, r_loc, r_depth, r_mark,
                        v_settled, v_mobile, v_parent, log_changes,
                        ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                    ):
                        return E_LOGCAP
                    _advance_entrant(si, K, lazy_map, r_state, r_src, src_entrant, ictrl)
            elif st == MOBILE:
                v = r_loc[r]
                act, u = _decide(
                    v, variant, V, adj_indptr, adj_indices, v_settled, v_mobile, r_mark
                )
                if act == A_ERR:
                    return E_VERTEX_OVERFLOW
                ok = True
                if act == A_STAY:
                    ok = _apply_blocked(
                        r, t, e, n, track_slow, r_loc, v_blocked, v_slowat,
                        v_parent, v_nchild, v_nslowch, v_settled, v_mobile,
                        log_changes, ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                    )
                elif act == A_MOVE:
                    ok = _apply_move(
                        r, u, t, e, variant, cross_idx, r_loc, r_depth,
                        v_settled, v_mobile, v_blocked, v_slowat, cross_t,
                        log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                    )
                else:
                    ok = _apply_settle(
                        r, u, t, e, n, r_state, r_loc, r_depth, r_mark,
                        v_settled, v_mobile, v_blocked, v_slowat, v_parent,
                        v_nchild, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                    )
                if not ok:
                    return E_LOGCAP
            # settled / gone / unmaterialized: virtual activation
        ictrl[I_EVN] = e + 1
        if ictrl[I_CAPVIOL] > 0:
            return E_CAPACITY
    return S_OK


# -- synchronous mode ---------------------------------------------------------


@maybe_njit
def _run_sync(
    n,
    V,
    adj_indptr,
    adj_indices,
    src_idx,
    K,
    c,
    pol_kind,
    pol_p,
    divisor,
    horizon_steps,
    stop_at_slow,
    replay_mode,
    sc_tmin,
    sc_tmax,
    sc_robot,
    uni_pool,
    ev_t,
    ev_r,
    ev_k,
    log_changes,
    ch_e,
    ch_r,
    ch_c,
    ch_v,
    r_state,
    r_loc,
    r_depth,
    r_mark,
    r_src,
    v_settled,
    v_mobile,
    v_blocked,
    v_slowat,
    v_parent,
    v_nchild,
    v_nslowch,
    src_entrant,
    dec_act,
    dec_tgt,
    kind_buf,
    order_keys,
    stamp,
    src_free,
    ictrl,
    fctrl,
):
    """Synchronous steps: every robot activates at once at t = 1, 2, ...

    Decisions are taken against the step-start configuration and applied in
    descending-depth order with entrance attempts last; conflicting attempts
    on one vertex are counted in I_DFSCONF (they never occur for a single
    source without crashes).
    """
    pool_n = uni_pool.shape[0]
    ev_cap = ev_t.shape[0]
    ch_cap = ch_e.shape[0]
    nsrc = src_idx.shape[0]
    track_slow = 1
    cross_t = uni_pool  # unused
    step = ictrl[I_STEP]
    while step <= horizon_steps:
        M = ictrl[I_M]
        if replay_mode == 0 and ictrl[I_PUNI] + M + nsrc + 4 >= pool_n:
            return S_NEED_POOL
        if replay_mode == 0 and ictrl[I_EVN] + M >= ev_cap:
            return S_NEED_EVCAP
        if log_changes == 1 and ictrl[I_CHN] + M + 2 * n + 8 >= ch_cap:
            return S_NEED_CHCAP
        t = float(step)
        ev_base = ictrl[I_EVN]
        # pass 1: decisions against the step-start state
        nmob = 0
        for r in range(1, M + 1):
            kind_buf[r] = K_ACT
            if r_state[r] == MOBILE:
                act, u = _decide(
                    r_loc[r], V_FINITE, V, adj_indptr, adj_indices,
                    v_settled, v_mobile, r_mark,
                )
                dec_act[r] = act
                dec_tgt[r] = u
                order_keys[nmob] = -r_depth[r] * (K + 2) + r
                nmob += 1
            else:
                dec_act[r] = -9
        for si in range(nsrc):
            src_free[si] = 1 if v_mobile[src_idx[si]] == 0 else 0
        order = np.argsort(order_keys[:nmob])
        # pass 2: apply mover actions, deepest robots first
        for oi in range(nmob):
            key = order_keys[order[oi]]
            r = key % (K + 2)
            if r <= 0:
                r += K + 2
            act = dec_act[r]
            eidx = ev_base + r - 1
            if act == A_STAY:
                if not _apply_blocked(
                    r, t, eidx, n, track_slow, r_loc, v_blocked, v_slowat,
                    v_parent, v_nchild, v_nslowch, v_settled, v_mobile,
                    log_changes, ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                ):
                    return E_LOGCAP
                continue
            u = dec_tgt[r]
            if stamp[u] == step:
                ictrl[I_DFSCONF] += 1
            stamp[u] = step
            crash = False
            if replay_mode == 1:
                crash = ev_k[ev_base + r - 1] == K_DEL
            elif ictrl[I_CRASHED] + 1 <= _budget(c, t, divisor):
                if pol_kind == P_RANDOM:
                    crash = uni_pool[ictrl[I_PUNI]] < pol_p
                    ictrl[I_PUNI] += 1
                elif pol_kind == P_EAGER:
                    crash = True
                elif pol_kind == P_SCRIPTED:
                    crash = _script_match(t, r, sc_tmin, sc_tmax, sc_robot)
            ok = True
            if crash:
                kind_buf[r] = K_DEL
                ok = _delete_robot(
                    r, eidx, r_state, r_loc, v_settled, v_mobile, v_blocked,
                    v_slowat, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                )
            elif act == A_MOVE:
                if v_mobile[u] != 0:
                    ok = True  # conflicting simultaneous attempt, counted above
                else:
                    ok = _apply_move(
                        r, u, t, eidx, V_FINITE, -1, r_loc, r_depth,
                        v_settled, v_mobile, v_blocked, v_slowat, cross_t,
                        log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                    )
            else:
                if v_settled[u] != 0 or v_mobile[u] != 0:
                    ok = True
                else:
                    ok = _apply_settle(
                        r, u, t, eidx, n, r_state, r_loc, r_depth, r_mark,
                        v_settled, v_mobile, v_blocked, v_slowat, v_parent,
                        v_nchild, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                    )
            if not ok:
                return E_LOGCAP
        # entrance attempts last, one per source, against the start state
        n_new = 0
        for si in range(nsrc):
            r = src_entrant[si]
            if r == 0 or r_state[r] != OUTSIDE or src_free[si] == 0:
                continue
            s = src_idx[si]
            if stamp[s] == step:
                ictrl[I_DFSCONF] += 1
            stamp[s] = step
            if v_mobile[s] != 0:
                continue
            eidx = ev_base + r - 1
            crash = False
            if replay_mode == 1:
                crash = ev_k[eidx] == K_DEL
            elif ictrl[I_CRASHED] + 1 <= _budget(c, t, divisor):
                if pol_kind == P_RANDOM:
                    crash = uni_pool[ictrl[I_PUNI]] < pol_p
                    ictrl[I_PUNI] += 1
                elif pol_kind == P_EAGER:
                    crash = True
                elif pol_kind == P_SCRIPTED:
                    crash = _script_match(t, r, sc_tmin, sc_tmax, sc_robot)
            ok = True
            if crash:
                kind_buf[r] = K_DEL
                ok = _delete_robot(
                    r, eidx, r_state, r_loc, v_settled, v_mobile, v_blocked,
                    v_slowat, log_changes, ch_e, ch_r, ch_c, ch_v, ictrl,
                )
            else:
                ok = _enter_robot(
                    r, s, t, eidx, n, r_state, r_loc, r_depth, r_mark,
                    v_settled, v_mobile, v_parent, log_changes,
                    ch_e, ch_r, ch_c, ch_v, ictrl, fctrl,
                )
            if not ok:
                return E_LOGCAP
            nr = ictrl[I_NEXTG]
            if nr > K:
                return E_TRUNC
            r_state[nr] = OUTSIDE
            r_src[nr] = si
            src_entrant[si] = nr
            ictrl[I_NEXTG] = nr + 1
            n_new += 1
        # log the step: every materialized robot activates, ascending index
        if replay_mode == 0:
            for r in range(1, M + 1):
                evn = ictrl[I_EVN]
                ev_t[evn] = t
                ev_r[evn] = r
                ev_k[evn] = kind_buf[r]
                ictrl[I_EVN] = evn + 1
        else:
            ictrl[I_EVN] = ictrl[I_EVN] + M
        ictrl[I_M] = M + n_new
        step += 1
        ictrl[I_STEP] = step
        if ictrl[I_CAPVIOL] > 0:
            return E_CAPACITY
        if stop_at_slow == 1 and fctrl[F_SLOWMK] >= 0.0:
            return S_DONE_SLOW
    return S_DONE_HORIZON


# -- meaningful event times ----------------------------------------------------


@maybe_njit
def _meaningful(times, robots, mt_times, mt_flags):
    """t_0 = first activation of A_1; t_m = first later event of A_1..A_{m+1}."""
    m = 0
    for e in range(times.shape[0]):
        if robots[e] <= m + 1:
            mt_times[m] = times[e]
            mt_flags[e] = 1
            m += 1
    return m


# -- TASEP row recursion --------------------------------------------------------


@maybe_njit
def _tasep_row(ticks, prev, lprev, out):
    """Jump times of the next particle from the one ahead of it.

    ``prev[j-1]`` is the time the particle ahead makes its j-th jump; the new
    particle's j-th jump happens at its first clock tick after both its own
    (j-1)-th jump and ``prev[j-1]``.  Returns the number of jumps that fit
    below the time horizon (ticks beyond the horizon are not in ``ticks``).
    """
    T = ticks.shape[0]
    best = -lprev - 2
    ptr = 0
    L = 0
    for k0 in range(lprev):
        x = prev[k0]
        while ptr < T and ticks[ptr] <= x:
            ptr += 1
        cc = ptr - (k0 + 1)
        if cc > best:
            best = cc
        idx = best + k0 + 1
        if idx >= T:
            return L
        out[k0] = ticks[idx]
        L = k0 + 1
    return L


def _tasep_row_numpy(ticks, prev, lprev, out):
    """Vectorized numpy equivalent of :func:`_tasep_row` (fallback path)."""
    T = ticks.shape[0]
    if lprev == 0 or T == 0:
        return 0
    idx = np.searchsorted(ticks, prev[:lprev], side="right")
    run = np.maximum.accumulate(idx - np.arange(1, lprev + 1))
    cell = run + np.arange(1, lprev + 1)
    bad = np.nonzero(cell >= T)[0]
    L = int(bad[0]) if bad.size else lprev
    out[:L] = ticks[cell[:L]]
    return L


# -- coupling checker -----------------------------------------------------------


@maybe_njit
def _check_coupled(
    n,
    K,
    s_robots,
    mg_e,
    mg_env,
    mg_r,
    mg_c,
    mg_v,
    depth,
    status,
    slowf,
    newslow,
    out_pass,
    out_eidx,
    out_robot,
    out_counts,
):
    """Verify the coupled-run inequalities after every event.

    Environments are indexed 0=G, 1=P(n), 2=P(inf), 3=P*(inf), 4=B.  The
    merged change log (sorted by event, then environment) is swept once;
    after applying each event's rows the per-robot statements and the global
    counting inequalities are re-checked for the robots that could have
    changed.  The checked configuration after event e is the configuration
    at every instant up to the next event, so this covers all meaningful
    event times.
    """
    E = s_robots.shape[0]
    R = mg_e.shape[0]
    present_pn = 0
    present_pi = 0
    mobile_ps = 0
    cross_b = 0
    en_or_del_ps = 0
    g_slow_robots = 0
    pn_all_slow = 0
    g_all_slow = 0
    pn_all_slow_e = -1
    j = 0
    for e in range(E):
        n_new = 0
        while j < R and mg_e[j] == e:
            env = mg_env[j]
            r = mg_r[j]
            code = mg_c[j]
            val = mg_v[j]
            if code == C_ENTER_M:
                status[env, r] = MOBILE
                depth[env, r] = 1
                if env == 1:
                    present_pn += 1
                elif env == 2:
                    present_pi += 1
                elif env == 3:
                    mobile_ps += 1
                    en_or_del_ps += 1
            elif code == C_ENTER_S:
                status[env, r] = SETTLED
                depth[env, r] = 1
                if env == 1:
                    present_pn += 1
                elif env == 2:
                    present_pi += 1
                elif env == 3:
                    en_or_del_ps += 1
            elif code == C_MOVE:
                depth[env, r] = val
                if env == 4 and val == r:
                    cross_b += 1
            elif code == C_SETTLE:
                status[env, r] = SETTLED
                depth[env, r] = val
            elif code == C_DELETE:
                if env == 1:
                    if status[1, r] == SETTLED or slowf[1, r] == 1:
                        if out_pass[CHK_L2] == 1:
                            out_pass[CHK_L2] = 0
                            out_eidx[CHK_L2] = e
                            out_robot[CHK_L2] = r
                    if val >= D_MOBILE:
                        present_pn -= 1
                elif env == 2:
                    if val >= D_MOBILE:
                        present_pi -= 1
                elif env == 3:
                    if val == D_OUTSIDE:
                        en_or_del_ps += 1
                    elif status[3, r] == MOBILE:
                        mobile_ps -= 1
                status[env, r] = GONE
            elif code == C_SLOW:
                if env == 0:
                    slowf[0, r] = 1
                    g_slow_robots += 1
                elif env == 1:
                    slowf[1, r] = 1
                    if n_new < newslow.shape[0]:
                        newslow[n_new] = r
                        n_new += 1
            elif code == C_ALL_SLOW:
                if env == 0:
                    g_all_slow = 1
                elif env == 1:
                    pn_all_slow = 1
                    pn_all_slow_e = e
                    if g_all_slow == 0 or g_slow_robots != 2 * n:
                        if out_pass[CHK_PROP1] == 1:
                            out_pass[CHK_PROP1] = 0
                            out_eidx[CHK_PROP1] = e
                            out_robot[CHK_PROP1] = 0
            j += 1
        act = s_robots[e]
        not_deleted = status[0, act] != GONE and status[1, act] != GONE
        if not_deleted:
            # statement (a)
            if (
                (status[0, act] == OUTSIDE or status[0, act] == MOBILE)
                and slowf[0, act] == 0
            ):
                if depth[0, act] < depth[1, act]:
                    if out_pass[CHK_A] == 1:
                        out_pass[CHK_A] = 0
                        out_eidx[CHK_A] = e
                        out_robot[CHK_A] = act
            # statement (b)
            if status[1, act] == SETTLED or slowf[1, act] == 1:
                g_ok = status[0, act] == SETTLED or slowf[0, act] == 1
                if (not g_ok) or depth[0, act] > depth[1, act]:
                    if out_pass[CHK_B] == 1:
                        out_pass[CHK_B] = 0
                        out_eidx[CHK_B] = e
                        out_robot[CHK_B] = act
        for ii in range(n_new):
            r = newslow[ii]
            if status[0, r] == GONE or status[1, r] == GONE:
                continue
            g_ok = status[0, r] == SETTLED or slowf[0, r] == 1
            if (not g_ok) or depth[0, r] > depth[1, r]:
                if out_pass[CHK_B] == 1:
                    out_pass[CHK_B] = 0
                    out_eidx[CHK_B] = e
                    out_robot[CHK_B] = r
        if pn_all_slow == 0 and present_pn != present_pi:
            if out_pass[CHK_L4] == 1:
                out_pass[CHK_L4] = 0
                out_eidx[CHK_L4] = e
                out_robot[CHK_L4] = 0
        if mobile_ps > present_pi:
            if out_pass[CHK_L5] == 1:
                out_pass[CHK_L5] = 0
                out_eidx[CHK_L5] = e
                out_robot[CHK_L5] = 0
        if cross_b > en_or_del_ps:
            if out_pass[CHK_L6] == 1:
                out_pass[CHK_L6] = 0
                out_eidx[CHK_L6] = e
                out_robot[CHK_L6] = 0
        if status[3, act] != GONE:
            if depth[4, act] - act + 1 > depth[3, act]:
                if out_pass[CHK_INEQ4] == 1:
                    out_pass[CHK_INEQ4] = 0
                    out_eidx[CHK_INEQ4] = e
                    out_robot[CHK_INEQ4] = act
    out_counts[0] = present_pn
    out_counts[1] = present_pi
    out_counts[2] = mobile_ps
    out_counts[3] = cross_b
    out_counts[4] = en_or_del_ps
    out_counts[5] = g_slow_robots
    out_counts[6] = pn_all_slow_e
    return S_OK
