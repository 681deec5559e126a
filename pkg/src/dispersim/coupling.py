"""Coupled replays and machine checks of the comparison-process inequalities.

``couple`` samples one event order on a finite single-source environment and
replays it, unchanged, on the four increasingly slower path processes: the
finite path with the same vertex count, the plain infinite path, the infinite
path prefilled with settled dummies, and the doubly-infinite prefilled path B
where deletions are ignored.  A single sweep over the merged change logs then
re-verifies, after every event (hence at every meaningful event time), the
depth/state statements and counting inequalities that the analysis proves
must hold; any violation is a simulator bug.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels as krn
from .engine import EventOrder, generate_run, meaningful_times, replay
from .envs import EnvironmentGraph, infinite_path, path_graph
from .errors import DispersimError

ENV_NAMES = ("G", "P(n)", "P(inf)", "P*(inf)", "B")

CHECK_NAMES = {
    krn.CHK_A: "statement_a",
    krn.CHK_B: "statement_b",
    krn.CHK_L4: "count_pn_equals_pinf",
    krn.CHK_L5: "mobile_pstar_le_pinf",
    krn.CHK_L6: "crossings_le_entered_or_deleted",
    krn.CHK_INEQ4: "b_position_le_pstar_depth",
    krn.CHK_PROP1: "slow_makespan_2n_robots",
    krn.CHK_L2: "pn_slow_settled_never_deleted",
}


@dataclass
class CheckResult:
    name: str
    passed: bool | None  # None = indeterminate (horizon hit first)
    first_violation: dict | None = None

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "first_violation": self.first_violation,
        }


@dataclass
class CouplingReport:
    n: int
    c: float
    seed: int
    horizon: float
    n_events: int
    n_meaningful: int
    env_results: dict
    checks: dict
    counts: dict
    event_order: EventOrder | None = None
    change_logs: dict | None = None

    def all_passed(self) -> bool:
        return all(ck.passed for ck in self.checks.values())

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "c": self.c,
                "seed": self.seed,
                "horizon": self.horizon,
                "events": self.n_events,
                "meaningful_times": self.n_meaningful,
                "slow_makespans": {
                    name: self.env_results[name].slow_makespan
                    for name in ("G", "P(n)")
                },
                "checks": [ck.as_dict() for ck in self.checks.values()],
                "counts": self.counts,
            },
            indent=2,
        )

    # -- snapshot reconstruction (state and depth at each meaningful time) --

    def snapshots(self):
        """Yield (t_m, {env: {robot: (state, depth)}}) for every meaningful
        event time; the configuration is the one before activations at t_m."""
        if self.event_order is None or self.change_logs is None:
            raise DispersimError("coupling report was built without logs")
        S = self.event_order
        mt = meaningful_times(S)
        K = S.max_index
        state = {
            name: {i: ["outside", 0] for i in range(1, K + 1)}
            for name in ENV_NAMES
        }
        for i in range(1, K + 1):
            state["B"][i] = ["mobile", 0]
        pointers = {name: 0 for name in ENV_NAMES}
        mt_set = {}
        for e in np.nonzero(mt.event_flags)[0]:
            mt_set[int(e)] = float(S.times[e])
        for e in range(len(S.times)):
            if e in mt_set:
                yield mt_set[e], {
                    name: {i: tuple(st) for i, st in robots.items()}
                    for name, robots in state.items()
                }
            for name in ENV_NAMES:
                log = self.change_logs[name]
                j = pointers[name]
                while j < len(log.eidx) and log.eidx[j] == e:
                    r = int(log.robot[j])
                    code = int(log.code[j])
                    val = int(log.value[j])
                    if r == 0:  # run-level marker rows
                        j += 1
                        continue
                    st = state[name][r]
                    if code == krn.C_ENTER_M:
                        st[0], st[1] = "mobile", 1
                    elif code == krn.C_ENTER_S:
                        st[0], st[1] = "settled", 1
                    elif code == krn.C_MOVE:
                        st[1] = val
                    elif code == krn.C_SETTLE:
                        st[0], st[1] = "settled", val
                    elif code == krn.C_DELETE:
                        st[0] = "gone"
                    elif code == krn.C_SLOW:
                        if st[0] != "settled":
                            st[0] = "slow"
                    j += 1
                pointers[name] = j


def couple(
    env: EnvironmentGraph,
    c: float = 0.0,
    seed: int = 0,
    horizon: float | None = None,
    adversary="random",
    keep_logs: bool = False,
) -> CouplingReport:
    """Generate one event order on env and verify it across the path family."""
    if not env.is_finite():
        raise ValueError("coupling needs a finite base environment")
    if len(env.sources) != 1:
        raise ValueError("coupling is defined for single-source environments")
    n = env.n
    adv = adversary if c > 0 else None
    attempt_horizon = horizon
    for attempt in range(3):
        S, g_result = generate_run(
            env,
            c=c,
            adversary=adv,
            seed=seed,
            mode="async",
            horizon=attempt_horizon,
            stop="horizon",
            log_changes=True,
        )
        pn_result = replay(S, path_graph(n), log_changes=True)
        if pn_result.slow_makespan is not None or horizon is not None:
            break
        attempt_horizon = (attempt_horizon or S.horizon) * 2
    pi_result = replay(S, infinite_path("plain"), log_changes=True)
    ps_result = replay(S, infinite_path("prefilled"), log_changes=True)
    b_result = replay(
        S, infinite_path("tasep-b"), deletion_rule="ignore-deletions",
        log_changes=True,
    )
    results = {
        "G": g_result,
        "P(n)": pn_result,
        "P(inf)": pi_result,
        "P*(inf)": ps_result,
        "B": b_result,
    }
    logs = {name: results[name].changes for name in ENV_NAMES}
    checks, counts = _run_checks(S, results, logs, n)
    mt = meaningful_times(S)
    report = CouplingReport(
        n=n,
        c=c,
        seed=seed,
        horizon=S.horizon,
        n_events=len(S),
        n_meaningful=len(mt.times),
        env_results=results,
        checks=checks,
        counts=counts,
        event_order=S if keep_logs else None,
        change_logs=logs if keep_logs else None,
    )
    return report


def _run_checks(S: EventOrder, results: dict, logs: dict, n: int):
    K = S.max_index
    mg_e, mg_env, mg_r, mg_c, mg_v = _merge_logs(logs)
    depth = np.zeros((5, K + 2), dtype=np.int64)
    status = np.full((5, K + 2), krn.OUTSIDE, dtype=np.int8)
    status[4, :] = krn.MOBILE  # B robots start inside
    slowf = np.zeros((2, K + 2), dtype=np.int8)
    newslow = np.zeros(2 * n + 8, dtype=np.int64)
    out_pass = np.ones(krn.NCHECKS, dtype=np.int8)
    out_eidx = np.full(krn.NCHECKS, -1, dtype=np.int64)
    out_robot = np.full(krn.NCHECKS, -1, dtype=np.int64)
    out_counts = np.zeros(8, dtype=np.int64)
    krn._check_coupled(
        n, K, S.robots, mg_e, mg_env, mg_r, mg_c, mg_v,
        depth, status, slowf, newslow, out_pass, out_eidx, out_robot, out_counts,
    )
    checks = {}
    for slot, name in CHECK_NAMES.items():
        passed = bool(out_pass[slot])
        violation = None
        if not passed:
            e = int(out_eidx[slot])
            violation = {
                "event_index": e,
                "time": float(S.times[e]),
                "robot": int(out_robot[slot]),
            }
        checks[name] = CheckResult(name, passed, violation)
    # the slow-makespan ordering itself (Proposition): indeterminate when the
    # horizon cut either replay short
    g_slow = results["G"].slow_makespan
    pn_slow = results["P(n)"].slow_makespan
    if pn_slow is None:
        checks["slow_makespan_order"] = CheckResult("slow_makespan_order", None)
        checks["slow_makespan_2n_robots"] = CheckResult(
            "slow_makespan_2n_robots", None
        )
    else:
        ok = g_slow is not None and g_slow <= pn_slow
        violation = None
        if not ok:
            violation = {"g_slow": g_slow, "pn_slow": pn_slow}
        checks["slow_makespan_order"] = CheckResult(
            "slow_makespan_order", ok, violation
        )
    counts = {
        "present_pn": int(out_counts[0]),
        "present_pinf": int(out_counts[1]),
        "mobile_pstar": int(out_counts[2]),
        "b_crossings": int(out_counts[3]),
        "pstar_entered_or_deleted": int(out_counts[4]),
        "g_slow_robots": int(out_counts[5]),
    }
    return checks, counts


def _merge_logs(logs):
    es, envs, rs, cs, vs = [], [], [], [], []
    for k, name in enumerate(ENV_NAMES):
        log = logs[name]
        es.append(log.eidx)
        envs.append(np.full(len(log.eidx), k, dtype=np.int8))
        rs.append(log.robot)
        cs.append(log.code)
        vs.append(log.value)
    mg_e = np.concatenate(es)
    mg_env = np.concatenate(envs)
    mg_r = np.concatenate(rs)
    mg_c = np.concatenate(cs)
    mg_v = np.concatenate(vs)
    order = np.lexsort((mg_env, mg_e))
    return mg_e[order], mg_env[order], mg_r[order], mg_c[order], mg_v[order]


# -- spec check operations -----------------------------------------------------


def check_statements_ab(report: CouplingReport) -> CheckResult:
    """(a) not slow/settled in G implies depth_G >= depth_P(n); (b) slow or
    settled in P(n) implies slow/settled in G with depth_G <= depth_P(n)."""
    a = report.checks["statement_a"]
    b = report.checks["statement_b"]
    passed = a.passed and b.passed
    return CheckResult(
        "statements_ab", passed, a.first_violation or b.first_violation
    )


def check_prop_slow_makespan(report: CouplingReport) -> CheckResult:
    """Slow makespan of G never exceeds the path's, and at that moment G
    carries two slow robots per vertex."""
    order = report.checks["slow_makespan_order"]
    robots2n = report.checks["slow_makespan_2n_robots"]
    if order.passed is None or robots2n.passed is None:
        return CheckResult("prop_slow_makespan", None)
    passed = order.passed and robots2n.passed
    return CheckResult(
        "prop_slow_makespan", passed, order.first_violation or robots2n.first_violation
    )


def check_pn_pinf(report: CouplingReport) -> CheckResult:
    """Equal robot counts in P(n) and P(inf) before P(n)'s slow makespan."""
    return report.checks["count_pn_equals_pinf"]


def check_pinf_pstar(report: CouplingReport) -> CheckResult:
    """Mobile robots in P*(inf) never outnumber all robots in P(inf)."""
    return report.checks["mobile_pstar_le_pinf"]


def check_b_pstar(report: CouplingReport) -> CheckResult:
    """B crossings bounded by P*(inf) entries plus pre-entry deletions, and
    the per-robot position inequality between B and P*(inf)."""
    l6 = report.checks["crossings_le_entered_or_deleted"]
    i4 = report.checks["b_position_le_pstar_depth"]
    passed = l6.passed and i4.passed
    return CheckResult("b_pstar", passed, l6.first_violation or i4.first_violation)


def all_checks(report: CouplingReport) -> list[CheckResult]:
    return [
        check_statements_ab(report),
        check_prop_slow_makespan(report),
        check_pn_pinf(report),
        check_pinf_pstar(report),
        check_b_pstar(report),
        report.checks["pn_slow_settled_never_deleted"],
    ]
