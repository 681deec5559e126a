"""Batch driver: single runs, table-style experiments, coupled verification,
TASEP studies and plot-ready data series.

Exit codes: 0 success, 1 usage or I/O error, 2 dispersal incomplete at the
horizon, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import coupling, tasep, verify
from . import kernels as krn
from .adversary import load_script_file, make_policy
from .engine import generate_run
from .envs import load_env_spec
from .errors import DispersimError

EXPERIMENT_COLUMNS = [
    "env",
    "n",
    "c",
    "mode",
    "replicates",
    "mean_makespan",
    "std_makespan",
    "mean_slow_makespan",
    "std_slow_makespan",
    "mean_crash_pct",
    "std_crash_pct",
]


def _resolve_adversary(name: str, c: float, mode: str, p: float):
    if name.startswith("scripted:"):
        script = load_script_file(name.split(":", 1)[1])
        return make_policy("scripted", c, mode, script=script)
    return make_policy(name, c, mode, p=p)


def _add_run_flags(sp, c_list=False):
    sp.add_argument("--env", default=None, help="path:N | grid:WxH | bundled:NAME | map/graph file")
    if c_list:
        sp.add_argument("--c", default="0", help="crash densities, comma separated")
    else:
        sp.add_argument("--c", type=float, default=0.0, help="crash density in [0,1)")
    sp.add_argument(
        "--adversary",
        default="random",
        help="none | random | eager | scripted:FILE (random never fires at c=0)",
    )
    sp.add_argument("--adversary-p", type=float, default=1.0,
                    help="crash probability per attempt for the random policy")
    sp.add_argument("--mode", choices=("async", "sync"), default="async")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--tiebreak", choices=("lowest", "random"), default="lowest")


def _run_one(env_spec, c, adversary, adversary_p, mode, seed, horizon, tiebreak,
             log_changes=False):
    env = load_env_spec(env_spec)
    policy = _resolve_adversary(adversary, c, mode, adversary_p)
    S, result = generate_run(
        env, c=c, adversary=policy, seed=seed, mode=mode, horizon=horizon,
        tiebreak=tiebreak, log_changes=log_changes,
    )
    return env, S, result


def cmd_run(args) -> int:
    env, S, result = _run_one(
        args.env, args.c, args.adversary, args.adversary_p, args.mode,
        args.seed, args.horizon, args.tiebreak,
    )
    record = result.json_record(args.seed, args.env, args.c)
    text = json.dumps(record, indent=2)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "result.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        if args.save_events:
            S.save(os.path.join(args.out, "run.events"))
    return 0 if result.completed else 2


def _replicate_worker(payload):
    (env_spec, c, adversary, adversary_p, mode, seed, horizon, tiebreak) = payload
    _, _, result = _run_one(
        env_spec, c, adversary, adversary_p, mode, seed, horizon, tiebreak
    )
    return (result.makespan, result.slow_makespan, result.crash_fraction,
            result.completed)


def cmd_experiment(args) -> int:
    env = load_env_spec(args.env)
    cs = [float(x) for x in str(args.c).split(",")]
    rows = []
    incomplete = False
    for c in cs:
        payloads = [
            (args.env, c, args.adversary, args.adversary_p, args.mode,
             args.seed + i, args.horizon, args.tiebreak)
            for i in range(args.replicates)
        ]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                outs = list(pool.map(_replicate_worker, payloads))
        else:
            outs = [_replicate_worker(p) for p in payloads]
        mk = np.array([o[0] if o[0] is not None else np.nan for o in outs])
        sm = np.array([o[1] if o[1] is not None else np.nan for o in outs])
        cf = np.array([o[2] for o in outs])
        incomplete = incomplete or any(not o[3] for o in outs)
        rows.append(
            {
                "env": args.env,
                "n": env.n,
                "c": c,
                "mode": args.mode,
                "replicates": args.replicates,
                "mean_makespan": round(float(np.nanmean(mk)), 1),
                "std_makespan": round(float(np.nanstd(mk)), 1),
                "mean_slow_makespan": round(float(np.nanmean(sm)), 1),
                "std_slow_makespan": round(float(np.nanstd(sm)), 1),
                "mean_crash_pct": round(float(np.mean(cf)) * 100.0, 1),
                "std_crash_pct": round(float(np.std(cf)) * 100.0, 1),
            }
        )
    out = sys.stdout
    close = False
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out = open(os.path.join(args.out, "summary.csv"), "w", encoding="utf-8",
                   newline="")
        close = True
    writer = csv.DictWriter(out, fieldnames=EXPERIMENT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if close:
        out.close()
        for row in rows:
            print(",".join(str(row[k]) for k in EXPERIMENT_COLUMNS))
    return 2 if incomplete else 0


def cmd_couple(args) -> int:
    env = load_env_spec(args.env)
    report = coupling.couple(env, c=args.c, seed=args.seed, horizon=args.horizon)
    text = report.to_json()
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "coupling.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0 if report.all_passed() else 3


def cmd_tasep(args) -> int:
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    rates = []
    for j in range(args.seeds):
        seed = args.seed + j
        traj = tasep.run_tasep(args.t_max, K=args.K, seed=seed)
        rates.append(tasep.throughput(traj, args.t_max))
        if args.out:
            traj.save(os.path.join(args.out, f"tasep_{seed}.txt"))
    summary = {
        "t_max": args.t_max,
        "seeds": args.seeds,
        "mean_rate": float(np.mean(rates)),
        "std_rate": float(np.std(rates)),
    }
    print(json.dumps(summary, indent=2))
    if args.out:
        with open(os.path.join(args.out, "tasep_summary.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_verify(args) -> int:
    suites = list(verify.SUITES) if args.suite == "all" else [args.suite]
    overall = True
    for name in suites:
        kwargs = {}
        if name == "lemmas" and args.runs:
            kwargs["n_runs"] = args.runs
        if name == "invariants" and args.runs:
            kwargs["n_runs"] = args.runs
        if name == "tasep":
            if args.seeds:
                kwargs["n_seeds"] = args.seeds
            if args.t_max:
                kwargs["t_max"] = args.t_max
        if name == "bound" and args.runs:
            kwargs["runs_per_cell"] = args.runs
        report = verify.SUITES[name](base_seed=args.seed, **kwargs)
        status = "PASS" if report.passed else "FAIL"
        print(f"[{status}] suite {name}: {report.details}")
        if report.failures:
            print(json.dumps(report.failures[:5], indent=2, default=str))
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, f"verify_{name}.json"), "w",
                      encoding="utf-8") as fh:
                fh.write(report.to_json() + "\n")
        overall = overall and report.passed
    return 0 if overall else 3


def cmd_plotdata(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.trajectory:
        traj = tasep.TasepTrajectory.load(args.trajectory)
        with open(os.path.join(args.out, "crossings.csv"), "w", encoding="utf-8",
                  newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "crossings"])
            for i, t in enumerate(traj.crossing_times, start=1):
                w.writerow(["%.17g" % t, i])
        return 0
    env, S, result = _run_one(
        args.env, args.c, args.adversary, args.adversary_p, args.mode,
        args.seed, args.horizon, args.tiebreak, log_changes=True,
    )
    ch = result.changes
    entered = []
    settled = []
    n_in, n_set = 0, 0
    for j in range(len(ch.eidx)):
        code = int(ch.code[j])
        t = float(S.times[int(ch.eidx[j])])
        if code in (krn.C_ENTER_M, krn.C_ENTER_S):
            n_in += 1
            entered.append((t, n_in))
        if code in (krn.C_ENTER_S, krn.C_SETTLE):
            n_set += 1
            settled.append((t, n_set))
    for name, series in (("entered.csv", entered), ("tree_size.csv", settled)):
        with open(os.path.join(args.out, name), "w", encoding="utf-8",
                  newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "count"])
            for t, k in series:
                w.writerow(["%.17g" % t, k])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dispersim",
        description="Uniform dispersal simulator and verification harness",
    )
    ap.add_argument("--config", default=None, help="JSON file of flag defaults")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="one simulation, JSON result")
    _add_run_flags(sp)
    sp.add_argument("--out", default=None)
    sp.add_argument("--save-events", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("experiment", help="replicated runs, CSV summary")
    _add_run_flags(sp, c_list=True)
    sp.add_argument("--replicates", type=int, default=30)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("couple", help="coupled replays plus machine checks")
    sp.add_argument("--env", default=None)
    sp.add_argument("--c", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_couple)

    sp = sub.add_parser("tasep", help="exclusion-process trajectories")
    sp.add_argument("--t-max", type=float, default=20000.0)
    sp.add_argument("--seeds", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_tasep)

    sp = sub.add_parser("verify", help="verification suites")
    sp.add_argument("--suite", choices=("lemmas", "invariants", "tasep", "bound", "all"),
                    default="all")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--runs", type=int, default=None)
    sp.add_argument("--seeds", type=int, default=None)
    sp.add_argument("--t-max", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("plotdata", help="time-series CSVs for plotting")
    _add_run_flags(sp)
    sp.add_argument("--trajectory", default=None,
                    help="crossing-time file instead of a fresh run")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plotdata)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # config file provides defaults; explicit flags override
    if "--config" in argv:
        i = argv.index("--config")
        with open(argv[i + 1], "r", encoding="utf-8") as fh:
            defaults = json.load(fh)
    else:
        defaults = {}
    ap = build_parser()
    for action in ap._subparsers._group_actions[0].choices.values():
        action.set_defaults(
            **{k.replace("-", "_"): v for k, v in defaults.items()}
        )
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    if getattr(args, "env", "unused") is None and not getattr(args, "trajectory", None):
        print("error: an environment is required (--env or config)", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DispersimError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
