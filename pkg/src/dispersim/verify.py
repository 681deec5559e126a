"""Verification suites: coupled-run inequality checks over random graph
corpora, structural invariants over generated runs, the worst-case slow
makespan bound, and TASEP throughput/fluctuation bands.

These back both the ``verify`` CLI subcommand and the acceptance tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import coupling, tasep
from .adversary import budget
from .engine import generate_run, replay
from .envs import EnvironmentGraph, parse_graph_file, parse_grid_map, path_graph


@dataclass
class SuiteReport:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "suite": self.name,
                "passed": self.passed,
                "details": self.details,
                "failures": self.failures[:20],
            },
            indent=2,
        )


# -- random environment corpus -------------------------------------------------


def random_tree_env(n: int, seed: int) -> EnvironmentGraph:
    rng = np.random.default_rng(seed)
    edges = [[int(rng.integers(1, v)), v] for v in range(2, n + 1)]
    spec = {"n": n, "edges": edges, "sources": [int(rng.integers(1, n + 1))]}
    return parse_graph_file(json.dumps(spec))


def random_grid_with_holes_env(seed: int, side_max: int = 5) -> EnvironmentGraph:
    rng = np.random.default_rng(seed)
    while True:
        h = int(rng.integers(2, side_max + 1))
        w = int(rng.integers(2, side_max + 1))
        cells = rng.random((h, w)) < 0.78
        free = np.argwhere(cells)
        if len(free) < 2:
            continue
        sy, sx = free[rng.integers(len(free))]
        rows = []
        for y in range(h):
            row = ""
            for x in range(w):
                if y == sy and x == sx:
                    row += "S"
                elif cells[y, x]:
                    row += "."
                else:
                    row += "#"
            rows.append(row)
        try:
            return parse_grid_map("\n".join(rows))
        except Exception:
            continue


def random_dense_env(n: int, seed: int) -> EnvironmentGraph:
    rng = np.random.default_rng(seed)
    edges = [[int(rng.integers(1, v)), v] for v in range(2, n + 1)]
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if rng.random() < 0.35:
                edges.append([u, v])
    spec = {"n": n, "edges": edges, "sources": [int(rng.integers(1, n + 1))]}
    return parse_graph_file(json.dumps(spec))


def random_multisource_env(n: int, seed: int) -> EnvironmentGraph:
    rng = np.random.default_rng(seed)
    edges = [[int(rng.integers(1, v)), v] for v in range(2, n + 1)]
    k = int(rng.integers(2, 4))
    sources = [int(s) + 1 for s in rng.choice(n, size=min(k, n), replace=False)]
    spec = {"n": n, "edges": edges, "sources": sources}
    return parse_graph_file(json.dumps(spec))


def corpus_env(kind: str, n: int, seed: int) -> EnvironmentGraph:
    if kind == "tree":
        return random_tree_env(n, seed)
    if kind == "grid":
        return random_grid_with_holes_env(seed)
    if kind == "dense":
        return random_dense_env(n, seed)
    if kind == "path":
        return path_graph(n)
    if kind == "multi":
        return random_multisource_env(n, seed)
    raise ValueError(kind)


# -- suite 1: coupled-run lemma checks ------------------------------------------


def run_lemma_suite(n_runs: int = 200, base_seed: int = 0, n_max: int = 25) -> SuiteReport:
    """Coupled replays over the three topology families and the c grid; every
    proven inequality must hold at every meaningful event time."""
    rng = np.random.default_rng(base_seed)
    families = ("tree", "grid", "dense")
    c_grid = (0.0, 0.25, 0.5, 0.75)
    failures = []
    runs = 0
    while runs < n_runs:
        fam = families[runs % 3]
        c = c_grid[(runs // 3) % 4]
        n = int(rng.integers(2, n_max + 1))
        env = corpus_env(fam, n, int(rng.integers(1 << 31)))
        seed = base_seed + runs
        report = coupling.couple(env, c=c, seed=seed)
        for ck in coupling.all_checks(report):
            if ck.passed is False:
                failures.append(
                    {
                        "run": runs,
                        "family": fam,
                        "n": env.n,
                        "c": c,
                        "seed": seed,
                        "check": ck.name,
                        "violation": ck.first_violation,
                    }
                )
            elif ck.passed is None:
                failures.append(
                    {
                        "run": runs,
                        "family": fam,
                        "n": env.n,
                        "c": c,
                        "seed": seed,
                        "check": ck.name,
                        "violation": "indeterminate (horizon)",
                    }
                )
        runs += 1
    return SuiteReport(
        "lemmas",
        passed=not failures,
        details={"runs": runs, "families": list(families), "c_grid": list(c_grid)},
        failures=failures,
    )


# -- suite 2: structural invariants ---------------------------------------------


def _forest_ok(result, env) -> bool:
    """Parent pointers must form a forest rooted at source vertices."""
    parent = {}
    for u, v in result.tree_edges:
        if v in parent:
            return False  # two parents
        parent[v] = u
    roots = set(result.tree_roots)
    if not roots.issubset(set(env.sources)):
        return False
    if len(result.tree_edges) != result.counters["settled"] - len(roots):
        return False
    for v in parent:
        seen = set()
        cur = v
        while cur in parent:
            if cur in seen:
                return False  # cycle
            seen.add(cur)
            cur = parent[cur]
        if cur not in roots:
            return False
    return True


def audit_event_order(S, env, c: float, divisor: int) -> list[str]:
    """Structural audits of a generated order: budget safety and
    crash-on-attempt (checked by a fresh replay), settled immortality."""
    problems = []
    del_idx = np.nonzero(S.kinds == 1)[0]
    for j, e in enumerate(del_idx, start=1):
        if j > budget(c, float(S.times[e]), divisor):
            problems.append(f"budget exceeded at event {e} (deletion {j})")
            break
    rr = replay(S, env)
    if rr.counters["settled_deletions"] > 0:
        problems.append("a settled robot was deleted")
    if rr.counters["non_attempt_deletions"] > 0:
        problems.append("a deletion did not coincide with a movement attempt")
    if rr.counters["capacity_violations"] > 0:
        problems.append("capacity violation in replay")
    return problems


def run_invariant_suite(n_runs: int = 1000, base_seed: int = 0) -> SuiteReport:
    """Generated runs over mixed environments, modes and crash densities;
    the tree/forest, capacity, immortality, slow-permanence and budget
    assertions must never fire."""
    rng = np.random.default_rng(base_seed)
    kinds = ("tree", "grid", "dense", "path", "multi")
    c_grid = (0.0, 0.25, 0.5, 0.75)
    failures = []
    for run in range(n_runs):
        kind = kinds[run % len(kinds)]
        c = c_grid[(run // len(kinds)) % len(c_grid)]
        mode = "sync" if run % 7 == 3 else "async"
        n = int(rng.integers(2, 26))
        env = corpus_env(kind, n, int(rng.integers(1 << 31)))
        seed = base_seed + run
        adv = "random" if c > 0 else None
        S, result = generate_run(env, c=c, adversary=adv, seed=seed, mode=mode)
        probs = []
        ctr = result.counters
        if ctr["capacity_violations"]:
            probs.append("capacity")
        if ctr["mobile_alone"]:
            probs.append("mobile robot without settled robot")
        if ctr["slow_violations"]:
            probs.append("slow robot moved or deleted")
        if ctr["settled_deletions"]:
            probs.append("settled robot deleted")
        if not _forest_ok(result, env):
            probs.append("settled robots do not form a forest")
        if len(env.sources) == 1 and result.makespan is not None:
            if len(result.tree_roots) != 1:
                probs.append("single-source run did not yield one tree root")
        if mode == "async":
            probs.extend(audit_event_order(S, env, c, 4))
        else:
            del_idx = np.nonzero(S.kinds == 1)[0]
            for j, e in enumerate(del_idx, start=1):
                if j > budget(c, float(S.times[e]), 2):
                    probs.append("sync budget exceeded")
                    break
        for p in probs:
            failures.append(
                {"run": run, "kind": kind, "c": c, "mode": mode, "n": env.n,
                 "seed": seed, "problem": p}
            )
    return SuiteReport(
        "invariants",
        passed=not failures,
        details={"runs": n_runs},
        failures=failures,
    )


# -- suite 3: worst-case slow-makespan bound -------------------------------------


def slow_makespan_bound(n: int, c: float) -> float:
    return 8.0 * (1.0 / (1.0 - c) + n ** (-1.0 / 3.0)) * n


def run_bound_suite(
    ns=(100, 300), cs=(0.0, 0.25, 0.5), runs_per_cell: int = 40, base_seed: int = 0,
    min_fraction: float = 0.95,
) -> SuiteReport:
    """Path-graph slow makespans against the proven worst-case scale."""
    failures = []
    details = {}
    for n in ns:
        env = path_graph(n)
        for c in cs:
            bound = slow_makespan_bound(n, c)
            ok = 0
            for j in range(runs_per_cell):
                seed = base_seed + j
                adv = "random" if c > 0 else None
                _, result = generate_run(env, c=c, adversary=adv, seed=seed)
                if result.slow_makespan is not None and result.slow_makespan <= bound:
                    ok += 1
            frac = ok / runs_per_cell
            details[f"n={n},c={c}"] = {"bound": round(bound, 1), "fraction": frac}
            if frac < min_fraction:
                failures.append(
                    {"n": n, "c": c, "bound": bound, "fraction": frac}
                )
    return SuiteReport(
        "bound", passed=not failures, details=details, failures=failures
    )


# -- suite 4: TASEP throughput and fluctuations ----------------------------------


def run_tasep_suite(
    n_seeds: int = 50,
    t_max: float = 30000.0,
    throughput_t: float = 20000.0,
    throughput_seeds: int = 20,
    base_seed: int = 0,
) -> SuiteReport:
    """Current through the origin edge converges to 1/4 with roughly t^(1/3)
    scale deviations."""
    trajs = [tasep.run_tasep(t_max, seed=base_seed + j) for j in range(n_seeds)]
    t_rate = min(throughput_t, t_max)
    rates = [
        tasep.throughput(trajs[j], t_rate) for j in range(min(throughput_seeds, n_seeds))
    ]
    mean_rate = float(np.mean(rates))
    t_grid = np.geomspace(t_max / 30.0, t_max, 8)
    slope = tasep.fluctuation_exponent(trajs, t_grid)
    failures = []
    if not (0.245 <= mean_rate <= 0.255):
        failures.append({"mean_rate": mean_rate, "band": [0.245, 0.255]})
    if not (0.25 <= slope <= 0.42):
        failures.append({"fluctuation_slope": slope, "band": [0.25, 0.42]})
    return SuiteReport(
        "tasep",
        passed=not failures,
        details={
            "mean_rate": round(mean_rate, 5),
            "fluctuation_slope": round(slope, 4),
            "seeds": n_seeds,
            "t_max": t_max,
        },
        failures=failures,
    )


SUITES = {
    "lemmas": run_lemma_suite,
    "invariants": run_invariant_suite,
    "bound": run_bound_suite,
    "tasep": run_tasep_suite,
}
