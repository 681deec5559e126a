"""Robot lifecycle state machine: entrance, movement, settling, marking,
tree maintenance, slow-vertex detection and metric extraction.

``SimState`` owns the numpy arrays the kernels operate on; the module-level
operations (``decide``, ``try_enter``, ``apply_action``, ``update_slow``,
``metrics``) are thin wrappers over the same kernel helpers the batch loops
use, so there is exactly one implementation of the transition semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels as krn
from .envs import (
    FINITE_GENERAL,
    FINITE_PATH,
    INFINITE_PLAIN,
    INFINITE_PREFILLED,
    TASEP_B,
    EnvironmentGraph,
)
from .errors import CapacityViolationError

_VARIANT_CODE = {
    FINITE_GENERAL: krn.V_FINITE,
    FINITE_PATH: krn.V_FINITE,
    INFINITE_PLAIN: krn.V_INF_PLAIN,
    INFINITE_PREFILLED: krn.V_INF_PRE,
    TASEP_B: krn.V_TASEP_B,
}

_STATE_NAME = {
    krn.UNMAT: "unmaterialized",
    krn.OUTSIDE: "outside",
    krn.MOBILE: "mobile",
    krn.SETTLED: "settled",
    krn.GONE: "crashed",
}


class Action(NamedTuple):
    kind: str  # "stay" | "move" | "settle"
    target: int | None


def stay_put() -> Action:
    return Action("stay", None)


def move_to(u: int) -> Action:
    return Action("move", u)


def move_and_settle(u: int) -> Action:
    return Action("settle", u)


class NeighborView(NamedTuple):
    """What a mobile robot senses about one neighboring vertex."""

    vertex: int
    has_settled: bool
    marks_here: bool
    has_mobile: bool


@dataclass
class Robot:
    index: int
    state: str
    location: int | None
    depth: int
    marks: int | None


@dataclass
class TreeSnapshot:
    nodes: list[int]
    edges: list[tuple[int, int]]  # (parent, child): child's settled robot marks parent
    roots: list[int]

    def is_forest(self) -> bool:
        return len(self.edges) == len(self.nodes) - len(self.roots)


@dataclass
class ChangeLog:
    """Per-event state-change rows emitted by a replay or generative run."""

    eidx: np.ndarray
    robot: np.ndarray
    code: np.ndarray
    value: np.ndarray

    def __len__(self) -> int:
        return len(self.eidx)


@dataclass
class RunResult:
    makespan: float | None
    slow_makespan: float | None
    entered: int
    crashed: int
    crash_fraction: float
    n: int | None
    tree_edges: list[tuple[int, int]]
    completed: bool
    mode: str
    tree_roots: list[int] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    crossing_times: np.ndarray | None = None
    changes: ChangeLog | None = None

    def json_record(self, seed, env_label, c):
        return {
            "seed": seed,
            "env": env_label,
            "n": self.n,
            "c": c,
            "mode": self.mode,
            "makespan": self.makespan,
            "slow_makespan": self.slow_makespan,
            "entered": self.entered,
            "crashed": self.crashed,
            "crash_fraction": self.crash_fraction,
            "tree_edges": [[u, v] for u, v in self.tree_edges],
        }


class SimState:
    """Array-backed state of one environment under one event order."""

    def __init__(
        self,
        env: EnvironmentGraph,
        K: int,
        log_changes: bool = False,
        change_capacity: int = 0,
        position_capacity: int = 0,
        generate: bool = False,
    ):
        self.env = env
        self.K = int(K)
        self.variant = _VARIANT_CODE[env.variant]
        self.log_changes = log_changes
        n = env.n if env.is_finite() else 0
        self.n = n
        if env.is_finite():
            self.voff = 0
            self.V = n + 1
            self.track_slow = 1
            self.adj_indptr = env.adj_indptr
            self.adj_indices = env.adj_indices
        else:
            self.track_slow = 0
            self.adj_indptr = np.zeros(1, dtype=np.int64)
            self.adj_indices = np.zeros(0, dtype=np.int64)
            if env.variant == TASEP_B:
                self.voff = self.K
                self.V = self.K + position_capacity + 3
            else:
                self.voff = 0
                cap = position_capacity if env.variant == INFINITE_PREFILLED else 0
                self.V = max(self.K + 4, cap + 3)
        K1 = self.K + 2
        self.r_state = np.zeros(K1, dtype=np.int8)
        self.r_loc = np.zeros(K1, dtype=np.int64)
        self.r_depth = np.zeros(K1, dtype=np.int64)
        self.r_mark = np.zeros(K1, dtype=np.int64)
        self.r_src = np.full(K1, -1, dtype=np.int64)
        V = self.V
        self.v_settled = np.zeros(V, dtype=np.int64)
        self.v_mobile = np.zeros(V, dtype=np.int64)
        self.v_blocked = np.full(V, -1.0, dtype=np.float64)
        self.v_slowat = np.full(V, -1.0, dtype=np.float64)
        self.v_parent = np.zeros(V, dtype=np.int64)
        self.v_nchild = np.zeros(V, dtype=np.int64)
        self.v_nslowch = np.zeros(V, dtype=np.int64)
        nsrc = len(env.sources)
        self.src_idx = np.array(
            [s + self.voff for s in env.sources], dtype=np.int64
        )
        self.src_entrant = np.zeros(max(nsrc, 1), dtype=np.int64)
        self.ictrl = np.zeros(krn.N_ICTRL, dtype=np.int64)
        self.fctrl = np.array([0.0, -1.0, -1.0], dtype=np.float64)
        cap = max(change_capacity, 16) if log_changes else 1
        self.ch_e = np.zeros(cap, dtype=np.int64)
        self.ch_r = np.zeros(cap, dtype=np.int64)
        self.ch_c = np.zeros(cap, dtype=np.int8)
        self.ch_v = np.zeros(cap, dtype=np.int64)
        self.cross_t = np.zeros(1, dtype=np.float64)
        self.lazy_map = 0
        # initial occupancy and robot placement
        if env.variant in (INFINITE_PREFILLED, TASEP_B):
            self.v_settled[1:] = krn.DUMMY
        if env.variant == TASEP_B:
            for i in range(1, self.K + 1):
                idx = self.K - i + 1
                self.r_state[i] = krn.MOBILE
                self.r_loc[i] = idx
                self.v_mobile[idx] = i
            self.cross_t = np.zeros(self.K + 2, dtype=np.float64)
        elif nsrc == 1 and not generate:
            # single entrance stream: robots queue in global index order
            self.r_state[1 : self.K + 1] = krn.OUTSIDE
            self.r_src[1 : self.K + 1] = 0
            self.src_entrant[0] = 1 if self.K >= 1 else 0
            self.ictrl[krn.I_M] = self.K
            self.ictrl[krn.I_NEXTG] = self.K + 1
        else:
            # per-source streams, materialized in entry order
            self.lazy_map = 1
            m = min(nsrc, self.K)
            for si in range(m):
                self.r_state[si + 1] = krn.OUTSIDE
                self.r_src[si + 1] = si
                self.src_entrant[si] = si + 1
            self.ictrl[krn.I_M] = m
            self.ictrl[krn.I_NEXTG] = m + 1

    # -- inspection --------------------------------------------------------

    @property
    def time(self) -> float:
        return float(self.fctrl[krn.F_T])

    def robot(self, i: int) -> Robot:
        st = int(self.r_state[i])
        loc = int(self.r_loc[i]) - self.voff if st in (krn.MOBILE, krn.SETTLED) else None
        marks = None
        if st == krn.SETTLED:
            mk = int(self.r_mark[i])
            marks = mk - self.voff if mk != 0 else None
        return Robot(i, _STATE_NAME[st], loc, int(self.r_depth[i]), marks)

    def tree_snapshot(self) -> TreeSnapshot:
        nodes, edges, roots = [], [], []
        for idx in range(1, self.V):
            s = self.v_settled[idx]
            if s == 0:
                continue
            v = idx - self.voff
            nodes.append(v)
            p = self.v_parent[idx]
            if p > 0:
                edges.append((int(p) - self.voff, v))
            elif p == -1:
                roots.append(v)
        return TreeSnapshot(nodes, edges, roots)

    def vertex_occupants(self, v: int) -> tuple[int | None, int | None]:
        idx = v + self.voff
        s = int(self.v_settled[idx])
        m = int(self.v_mobile[idx])
        return (s if s != 0 else None, m if m != 0 else None)

    def slow_vertices(self) -> list[int]:
        return [
            int(idx) - self.voff
            for idx in np.nonzero(self.v_slowat >= 0)[0]
        ]

    def changes(self) -> ChangeLog:
        k = int(self.ictrl[krn.I_CHN])
        return ChangeLog(
            self.ch_e[:k].copy(),
            self.ch_r[:k].copy(),
            self.ch_c[:k].copy(),
            self.ch_v[:k].copy(),
        )

    def grow_changelog(self) -> None:
        m = len(self.ch_e)
        self.ch_e = np.concatenate([self.ch_e, np.zeros(m, dtype=np.int64)])
        self.ch_r = np.concatenate([self.ch_r, np.zeros(m, dtype=np.int64)])
        self.ch_c = np.concatenate([self.ch_c, np.zeros(m, dtype=np.int8)])
        self.ch_v = np.concatenate([self.ch_v, np.zeros(m, dtype=np.int64)])

    def counters(self) -> dict:
        ic = self.ictrl
        return {
            "settled": int(ic[krn.I_SETTLED]),
            "slow_vertices": int(ic[krn.I_SLOWV]),
            "capacity_violations": int(ic[krn.I_CAPVIOL]),
            "mobile_alone": int(ic[krn.I_MOBILE_ALONE]),
            "slow_violations": int(ic[krn.I_SLOWVIOL]),
            "settled_deletions": int(ic[krn.I_DEL_SETTLED]),
            "outside_deletions": int(ic[krn.I_DEL_OUTSIDE]),
            "dfs_conflicts": int(ic[krn.I_DFSCONF]),
            "non_attempt_deletions": int(ic[krn.I_DEL_BLOCKED]),
            "materialized": int(ic[krn.I_M]),
        }


# -- spec operations ----------------------------------------------------------


def decide(local_view: list[NeighborView], at_vertex: int = 0) -> Action:
    """Local rule: prefer the lowest-id marked single-robot neighbor, then the
    lowest-id empty neighbor, else stay put."""
    if not local_view:
        return stay_put()
    ids = [nv.vertex for nv in local_view]
    top = max(max(ids), at_vertex) + 2
    indptr = np.zeros(top + 1, dtype=np.int64)
    center = at_vertex if at_vertex > 0 else top - 1
    neigh = sorted(local_view, key=lambda nv: nv.vertex)
    indices = np.array([nv.vertex for nv in neigh], dtype=np.int64)
    indptr[center + 1 :] = len(indices)
    v_settled = np.zeros(top, dtype=np.int64)
    v_mobile = np.zeros(top, dtype=np.int64)
    r_mark = np.zeros(len(neigh) + 2, dtype=np.int64)
    for k, nv in enumerate(neigh):
        if nv.has_settled:
            rid = k + 1
            v_settled[nv.vertex] = rid
            r_mark[rid] = center if nv.marks_here else 0
        if nv.has_mobile:
            v_mobile[nv.vertex] = len(neigh) + 1
    act, u = krn._decide(
        center, krn.V_FINITE, top, indptr, indices, v_settled, v_mobile, r_mark
    )
    if act == krn.A_MOVE:
        return move_to(int(u))
    if act == krn.A_SETTLE:
        return move_and_settle(int(u))
    return stay_put()


def decide_for(state: SimState, robot: int) -> Action:
    """Decision for a mobile robot currently placed in a SimState."""
    act, u = krn._decide(
        state.r_loc[robot],
        state.variant,
        state.V,
        state.adj_indptr,
        state.adj_indices,
        state.v_settled,
        state.v_mobile,
        state.r_mark,
    )
    if act == krn.A_MOVE:
        return move_to(int(u) - state.voff)
    if act == krn.A_SETTLE:
        return move_and_settle(int(u) - state.voff)
    if act == krn.A_ERR:
        raise CapacityViolationError("lazy path capacity exhausted")
    return stay_put()


def try_enter(state: SimState, t: float, source: int = 0, crash: bool = False) -> str:
    """Entrance attempt by the lowest-index outside robot of a source.

    Returns one of "blocked", "crashed", "entered-mobile",
    "entered-settled-root".
    """
    r = int(state.src_entrant[source])
    if r == 0:
        return "blocked"
    s = state.src_idx[source]
    if state.v_mobile[s] != 0:
        return "blocked"
    eidx = int(state.ictrl[krn.I_EVN])
    if crash:
        krn._delete_robot(
            r, eidx, state.r_state, state.r_loc, state.v_settled, state.v_mobile,
            state.v_blocked, state.v_slowat, 1 if state.log_changes else 0,
            state.ch_e, state.ch_r, state.ch_c, state.ch_v, state.ictrl,
        )
        out = "crashed"
    else:
        krn._enter_robot(
            r, s, t, eidx, state.n, state.r_state, state.r_loc, state.r_depth,
            state.r_mark, state.v_settled, state.v_mobile, state.v_parent,
            1 if state.log_changes else 0,
            state.ch_e, state.ch_r, state.ch_c, state.ch_v, state.ictrl, state.fctrl,
        )
        out = (
            "entered-settled-root"
            if state.r_state[r] == krn.SETTLED
            else "entered-mobile"
        )
    krn._advance_entrant(
        source, state.K, state.lazy_map, state.r_state, state.r_src,
        state.src_entrant, state.ictrl,
    )
    return out


def apply_action(
    state: SimState, robot: int, action: Action, t: float, crash: bool = False
) -> None:
    """Apply a decision for a mobile robot; a crash deletes the mover."""
    eidx = int(state.ictrl[krn.I_EVN])
    logf = 1 if state.log_changes else 0
    if action.kind == "stay":
        krn._apply_blocked(
            robot, t, eidx, state.n, state.track_slow, state.r_loc,
            state.v_blocked, state.v_slowat, state.v_parent, state.v_nchild,
            state.v_nslowch, state.v_settled, state.v_mobile, logf,
            state.ch_e, state.ch_r, state.ch_c, state.ch_v, state.ictrl, state.fctrl,
        )
        return
    if crash:
        krn._delete_robot(
            robot, eidx, state.r_state, state.r_loc, state.v_settled,
            state.v_mobile, state.v_blocked, state.v_slowat, logf,
            state.ch_e, state.ch_r, state.ch_c, state.ch_v, state.ictrl,
        )
        return
    u = action.target + state.voff
    if action.kind == "move":
        krn._apply_move(
            robot, u, t, eidx, state.variant, state.voff + 1, state.r_loc,
            state.r_depth, state.v_settled, state.v_mobile, state.v_blocked,
            state.v_slowat, state.cross_t, logf,
            state.ch_e, state.ch_r, state.ch_c, state.ch_v, state.ictrl,
        )
    else:
        krn._apply_settle(
            robot, u, t, eidx, state.n, state.r_state, state.r_loc,
            state.r_depth, state.r_mark, state.v_settled, state.v_mobile,
            state.v_blocked, state.v_slowat, state.v_parent, state.v_nchild,
            logf, state.ch_e, state.ch_r, state.ch_c, state.ch_v,
            state.ictrl, state.fctrl,
        )
    if state.ictrl[krn.I_CAPVIOL] > 0:
        raise CapacityViolationError(f"applying {action} for robot {robot}")


def update_slow(state: SimState, v: int, t: float, blocked: bool = True) -> None:
    """Record a blocked activation at v (or re-examine after a child slowed)."""
    idx = v + state.voff
    if blocked:
        state.v_blocked[idx] = t
    krn._slow_cascade(
        idx, t, int(state.ictrl[krn.I_EVN]), state.n, state.track_slow,
        state.v_blocked, state.v_slowat, state.v_parent, state.v_nchild,
        state.v_nslowch, state.v_settled, state.v_mobile,
        1 if state.log_changes else 0,
        state.ch_e, state.ch_r, state.ch_c, state.ch_v, state.ictrl, state.fctrl,
    )


def metrics(state: SimState, mode: str = "async") -> RunResult:
    ms = float(state.fctrl[krn.F_MAKESPAN])
    sm = float(state.fctrl[krn.F_SLOWMK])
    makespan = ms if ms >= 0 else None
    slow_makespan = sm if sm >= 0 else None
    entered = int(state.ictrl[krn.I_ENTERED])
    crashed = int(state.ictrl[krn.I_CRASHED])
    # every robot that participated, counted once: the ones that entered plus
    # the ones deleted before they ever got in
    denom = entered + int(state.ictrl[krn.I_DEL_OUTSIDE])
    snap = state.tree_snapshot() if state.env.is_finite() else TreeSnapshot([], [], [])
    ncross = int(state.ictrl[krn.I_CROSSN])
    return RunResult(
        makespan=makespan,
        slow_makespan=slow_makespan,
        entered=entered,
        crashed=crashed,
        crash_fraction=(crashed / denom) if denom else 0.0,
        n=state.env.n,
        tree_edges=sorted(snap.edges),
        completed=makespan is not None and slow_makespan is not None,
        mode=mode,
        tree_roots=sorted(snap.roots),
        counters=state.counters(),
        crossing_times=state.cross_t[:ncross].copy()
        if state.env.variant == TASEP_B
        else None,
        changes=state.changes() if state.log_changes else None,
    )
