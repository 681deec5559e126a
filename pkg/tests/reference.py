"""Naive, readable reference implementation of the simulation semantics.

Written directly from the behavioral rules with dictionaries and a slow
fixpoint pass per event, deliberately sharing no code with the package
kernels; tests cross-check the fast paths against it on small cases.
"""

from dispersim.envs import INFINITE_PREFILLED, TASEP_B

DUMMY = "dummy"


class NaiveSim:
    def __init__(self, env, K):
        self.env = env
        self.K = K
        self.settled = {}  # vertex -> robot id or DUMMY
        self.mobile = {}  # vertex -> robot id
        self.marks = {}  # settled robot id -> marked vertex (None for roots)
        self.state = {i: "outside" for i in range(1, K + 1)}
        self.loc = {}
        self.depth = {i: 0 for i in range(1, K + 1)}
        self.blocked = {}  # vertex -> True while its mobile robot stands blocked
        self.slow_at = {}  # vertex -> time it became slow
        self.entered = 0
        self.crossings = []  # times robots stepped from vertex 0 to vertex 1 (B)
        self.deleted_outside = 0
        prefilled = env.variant in (INFINITE_PREFILLED, TASEP_B)
        if prefilled:
            self._dummy_everywhere = True
        else:
            self._dummy_everywhere = False
        if env.variant == TASEP_B:
            for i in range(1, K + 1):
                v = 1 - i
                self.state[i] = "mobile"
                self.loc[i] = v
                self.mobile[v] = i

    # -- occupancy ---------------------------------------------------------

    def settled_at(self, v):
        if v in self.settled:
            return self.settled[v]
        if self._dummy_everywhere and self.env.has_vertex(v):
            return DUMMY
        return None

    def mark_of(self, occupant, v):
        if occupant == DUMMY:
            return v - 1
        return self.marks.get(occupant)

    # -- decision (Algorithm local rule) -------------------------------------

    def decide(self, robot):
        v = self.loc[robot]
        neighbors = sorted(self.env.neighbors(v))
        for u in neighbors:
            s = self.settled_at(u)
            if s is not None and u not in self.mobile:
                if self.mark_of(s, u) == v:
                    return ("move", u)
        for u in neighbors:
            if self.settled_at(u) is None and u not in self.mobile:
                return ("settle", u)
        return ("stay", None)

    # -- slow detection: fixpoint over the current tree ----------------------

    def refresh_slow(self, t):
        changed = True
        while changed:
            changed = False
            for v in list(self.blocked.keys()):
                if v in self.slow_at or not self.blocked.get(v):
                    continue
                children = [
                    u
                    for u, r in self.settled.items()
                    if r != DUMMY and self.marks.get(r) == v
                ]
                if all(u in self.slow_at for u in children):
                    self.slow_at[v] = t
                    changed = True

    def all_slow(self):
        if not self.env.is_finite():
            return False
        return len(self.slow_at) == self.env.n


def naive_replay(S, env, deletion_rule="as-logged", record=False):
    """Apply an event order; returns the final NaiveSim (and optional
    per-event (state, loc, depth) snapshots)."""
    K = int(max(S.robots)) if len(S.robots) else 1
    sim = NaiveSim(env, K)
    nsrc = len(env.sources)
    makespan = None
    slow_makespan = None
    snaps = []
    # robot -> source assignment; single source takes the global order, and a
    # multi-source replay reconstructs the generative assignment
    if env.variant != TASEP_B:
        if nsrc <= 1:
            src_of = {i: 0 for i in range(1, K + 1)}
            next_unmapped = K + 1
        else:
            src_of = {i: i - 1 for i in range(1, min(nsrc, K) + 1)}
            next_unmapped = min(nsrc, K) + 1
    else:
        src_of = {}
        next_unmapped = K + 1

    def entrant_of(si):
        waiting = [
            i for i in range(1, K + 1) if src_of.get(i) == si and sim.state[i] == "outside"
        ]
        return min(waiting) if waiting else None

    def on_entrant_resolved(si):
        nonlocal next_unmapped
        if nsrc > 1:
            while next_unmapped <= K and sim.state[next_unmapped] == "gone":
                next_unmapped += 1
            if next_unmapped <= K and next_unmapped not in src_of:
                src_of[next_unmapped] = si
                next_unmapped += 1

    for e in range(len(S.times)):
        t = float(S.times[e])
        i = int(S.robots[e])
        kind = int(S.kinds[e])
        if kind == 1 and deletion_rule == "as-logged":
            st = sim.state[i]
            if st != "gone":
                if st == "outside":
                    si = src_of.get(i)
                    was_entrant = si is not None and entrant_of(si) == i
                    sim.deleted_outside += 1
                    sim.state[i] = "gone"
                    if was_entrant:
                        on_entrant_resolved(si)
                elif st == "mobile":
                    v = sim.loc.pop(i)
                    del sim.mobile[v]
                    sim.blocked.pop(v, None)
                    sim.state[i] = "gone"
                elif st == "settled":
                    v = sim.loc.pop(i)
                    del sim.settled[v]
                    sim.marks.pop(i, None)
                    sim.state[i] = "gone"
        else:
            st = sim.state[i]
            if st == "outside" and nsrc >= 1:
                si = src_of.get(i)
                if si is not None and entrant_of(si) == i:
                    s = env.sources[si]
                    if s not in sim.mobile:
                        if sim.settled_at(s) is None:
                            sim.settled[s] = i
                            sim.marks[i] = None
                            sim.state[i] = "settled"
                        else:
                            sim.mobile[s] = i
                            sim.state[i] = "mobile"
                        sim.loc[i] = s
                        sim.depth[i] = 1
                        sim.entered += 1
                        on_entrant_resolved(si)
            elif st == "mobile":
                act, u = sim.decide(i)
                v = sim.loc[i]
                if act == "stay":
                    sim.blocked[v] = True
                elif act == "move":
                    del sim.mobile[v]
                    sim.blocked.pop(v, None)
                    sim.mobile[u] = i
                    sim.loc[i] = u
                    sim.depth[i] += 1
                    if env.variant == TASEP_B and u == 1:
                        sim.crossings.append(t)
                else:  # settle
                    del sim.mobile[v]
                    sim.blocked.pop(v, None)
                    sim.settled[u] = i
                    sim.marks[i] = v
                    sim.loc[i] = u
                    sim.depth[i] += 1
                    sim.state[i] = "settled"
        if env.is_finite():
            sim.refresh_slow(t)
            if makespan is None and len(sim.settled) == env.n:
                makespan = t
            if slow_makespan is None and sim.all_slow():
                slow_makespan = t
        if record:
            snaps.append(
                (
                    dict(sim.state),
                    dict(sim.loc),
                    dict(sim.depth),
                    set(sim.slow_at),
                )
            )
    sim.makespan = makespan
    sim.slow_makespan = slow_makespan
    return (sim, snaps) if record else sim


def naive_sync_run(env, n_steps, K=None):
    """Parallel-update synchronous run without crashes: all robots decide
    against the step-start state; movers apply deepest-first, entrance last."""
    n = env.n
    K = K or (3 * n + 8)
    sim = NaiveSim(env, K)
    nsrc = len(env.sources)
    src_of = {}
    for si in range(min(nsrc, K)):
        src_of[si + 1] = si
    materialized = min(nsrc, K)
    makespan = None
    slow_makespan = None
    for step in range(1, n_steps + 1):
        t = float(step)
        movers = []
        for i in range(1, materialized + 1):
            if sim.state[i] == "mobile":
                movers.append((i, sim.decide(i)))
        src_free = {si: env.sources[si] not in sim.mobile for si in range(nsrc)}
        movers.sort(key=lambda pair: (-sim.depth[pair[0]], pair[0]))
        for i, (act, u) in movers:
            v = sim.loc[i]
            if act == "stay":
                sim.blocked[v] = True
            elif act == "move":
                assert u not in sim.mobile, "simultaneous attempts on one vertex"
                del sim.mobile[v]
                sim.blocked.pop(v, None)
                sim.mobile[u] = i
                sim.loc[i] = u
                sim.depth[i] += 1
            else:
                assert sim.settled_at(u) is None and u not in sim.mobile
                del sim.mobile[v]
                sim.blocked.pop(v, None)
                sim.settled[u] = i
                sim.marks[i] = v
                sim.loc[i] = u
                sim.depth[i] += 1
                sim.state[i] = "settled"
        for si in range(nsrc):
            if not src_free[si]:
                continue
            waiting = [
                i
                for i in range(1, materialized + 1)
                if src_of.get(i) == si and sim.state[i] == "outside"
            ]
            if not waiting:
                continue
            i = min(waiting)
            s = env.sources[si]
            if s in sim.mobile:
                continue
            if sim.settled_at(s) is None:
                sim.settled[s] = i
                sim.marks[i] = None
                sim.state[i] = "settled"
            else:
                sim.mobile[s] = i
                sim.state[i] = "mobile"
            sim.loc[i] = s
            sim.depth[i] = 1
            sim.entered += 1
            if materialized < K:
                materialized += 1
                src_of[materialized] = si
        sim.refresh_slow(t)
        if makespan is None and len(sim.settled) == env.n:
            makespan = t
        if slow_makespan is None and sim.all_slow():
            slow_makespan = t
            break
    sim.makespan = makespan
    sim.slow_makespan = slow_makespan
    return sim


def naive_tasep(ticks_per_particle, t_max):
    """Direct clock-driven TASEP with step initial condition.

    ``ticks_per_particle[i]`` is the sorted activation-time list of particle
    i+1 (initial position -i).  Returns the times particles hop from 0 to 1.
    """
    K = len(ticks_per_particle)
    pos = {i: 1 - (i + 1) for i in range(K)}  # particle index (0-based) -> position
    occupied = set(pos.values())
    events = []
    for i, ticks in enumerate(ticks_per_particle):
        for t in ticks:
            if t <= t_max:
                events.append((t, i))
    events.sort()
    crossings = []
    for t, i in events:
        p = pos[i]
        if p + 1 not in occupied:
            occupied.discard(p)
            pos[i] = p + 1
            occupied.add(p + 1)
            if p == 0:
                crossings.append(t)
    return crossings
