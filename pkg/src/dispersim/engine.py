"""Schedule generation, event logging and deterministic replay.

A generative run samples independent rate-1 exponential activation clocks
(robot clocks materialize lazily: A_{k+1}'s clock starts when A_k first
enters or crashes), consults the adversary at every movement attempt, logs
the full event order including virtual activations of settled and crashed
robots, and runs the local rule.  ``replay`` applies a logged order to any
environment variant with that variant's deletion rule; it consumes no
randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels as krn
from .adversary import AdversaryPolicy, make_policy
from .dispersal import RunResult, SimState, metrics
from .envs import TASEP_B, EnvironmentGraph
from .errors import (
    CapacityViolationError,
    TruncationExceededError,
    VertexOverflowError,
)

_POOL_CHUNK = 1 << 17
_EV_CHUNK = 1 << 16

_KIND_TEXT = {krn.K_ACT: "A", krn.K_DEL: "AD"}
_KIND_CODE = {"A": krn.K_ACT, "AD": krn.K_DEL}


@dataclass
class EventOrder:
    """Time-ordered activation log; the replayable order of events."""

    times: np.ndarray
    robots: np.ndarray
    kinds: np.ndarray
    horizon: float
    max_index: int
    mode: str = "async"

    def __len__(self) -> int:
        return len(self.times)

    def validate(self) -> None:
        t = self.times
        if len(t) == 0:
            return
        if np.any(np.diff(t) < 0):
            raise ValueError("event times must be non-decreasing")
        if self.mode == "async" and np.any(np.diff(t) == 0):
            same = np.nonzero(np.diff(t) == 0)[0]
            # ties are broken by ascending robot index at log time
            if np.any(self.robots[same] >= self.robots[same + 1]):
                raise ValueError("tied events must be ordered by robot index")

    def to_text(self) -> str:
        lines = []
        for i in range(len(self.times)):
            lines.append(
                "%.17g\t%d\t%s"
                % (self.times[i], self.robots[i], _KIND_TEXT[int(self.kinds[i])])
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "EventOrder":
        times, robots, kinds = [], [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            ts, rs, ks = line.split("\t")
            times.append(float(ts))
            robots.append(int(rs))
            kinds.append(_KIND_CODE[ks])
        t = np.array(times, dtype=np.float64)
        r = np.array(robots, dtype=np.int64)
        k = np.array(kinds, dtype=np.int8)
        # synchronous logs carry integer step times; async times are
        # continuous and integral with probability zero
        mode = "sync" if len(t) and np.all(t == np.floor(t)) else "async"
        return cls(
            times=t,
            robots=r,
            kinds=k,
            horizon=float(t[-1]) if len(t) else 0.0,
            max_index=int(r.max()) if len(r) else 0,
            mode=mode,
        )

    @classmethod
    def load(cls, path: str) -> "EventOrder":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


@dataclass
class MeaningfulTimes:
    """t_0 < t_1 < ...: the times at which the configuration can change."""

    times: np.ndarray
    event_flags: np.ndarray  # 1 where an event in S is at a meaningful time


def meaningful_times(S: EventOrder) -> MeaningfulTimes:
    E = len(S.times)
    mt = np.zeros(E, dtype=np.float64)
    flags = np.zeros(E, dtype=np.int8)
    m = krn._meaningful(S.times, S.robots, mt, flags)
    return MeaningfulTimes(mt[:m].copy(), flags)


def default_horizon(n: int, c: float) -> float:
    """2.5x the proven slow-makespan scale."""
    return 20.0 * n / (1.0 - c)


def default_truncation(n: int, c: float, horizon: float, divisor: int) -> int:
    return 3 * n + math.ceil(c * horizon / divisor) + 8


def _resolve_policy(adversary, c, mode) -> AdversaryPolicy:
    if adversary is None:
        return make_policy("none", c, mode)
    if isinstance(adversary, str):
        return make_policy(adversary, c, mode)
    if adversary.c != c or adversary.rate_divisor != (4 if mode == "async" else 2):
        raise ValueError("adversary policy budget does not match run parameters")
    return adversary


def generate_run(
    env: EnvironmentGraph,
    c: float = 0.0,
    adversary=None,
    seed: int = 0,
    mode: str = "async",
    horizon: float | None = None,
    stop: str = "auto",
    tiebreak: str = "lowest",
    log_changes: bool = False,
    K: int | None = None,
) -> tuple[EventOrder, RunResult]:
    """Run the local rule on a finite environment and log the event order.

    ``stop="auto"`` ends the run once every vertex is slow (nothing can
    change afterwards); ``stop="horizon"`` keeps logging virtual activations
    up to the horizon, which replays on slower environments need.
    Deterministic for a fixed argument tuple.
    """
    if not env.is_finite():
        raise ValueError("generative runs need a finite environment")
    if mode not in ("async", "sync"):
        raise ValueError(f"unknown mode {mode!r}")
    if not (0.0 <= c < 1.0):
        raise ValueError("c must be in [0, 1)")
    if stop not in ("auto", "horizon"):
        raise ValueError(f"unknown stop rule {stop!r}")
    n = env.n
    divisor = 4 if mode == "async" else 2
    if horizon is None:
        horizon = default_horizon(n, c)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if mode == "sync":
        horizon = float(int(horizon))
    policy = _resolve_policy(adversary, c, mode)
    k_try = K if K is not None else default_truncation(n, c, horizon, divisor)
    while True:
        out = _generate_once(
            env, c, policy, seed, mode, horizon, stop, tiebreak, log_changes, k_try
        )
        if out is None:
            k_try *= 2
            continue
        return out


def _generate_once(env, c, policy, seed, mode, horizon, stop, tiebreak, log_changes, K):
    n = env.n
    divisor = policy.rate_divisor
    rng = np.random.default_rng(seed)
    state = SimState(
        env,
        K,
        log_changes=log_changes,
        change_capacity=_EV_CHUNK + 2 * n + 64,
        generate=True,
    )
    ev_t = np.zeros(_EV_CHUNK, dtype=np.float64)
    ev_r = np.zeros(_EV_CHUNK, dtype=np.int64)
    ev_k = np.zeros(_EV_CHUNK, dtype=np.int8)
    pool_chunk = max(_POOL_CHUNK, 2 * K + 64)
    exp_pool = rng.standard_exponential(pool_chunk)
    uni_pool = rng.random(pool_chunk)
    sc_tmin, sc_tmax, sc_robot = policy.script_arrays()
    tiebreak_code = 1 if tiebreak == "random" else 0
    stop_code = 1 if stop == "auto" else 0
    logf = 1 if log_changes else 0
    if mode == "sync":
        dec_act = np.zeros(K + 2, dtype=np.int64)
        dec_tgt = np.zeros(K + 2, dtype=np.int64)
        kind_buf = np.zeros(K + 2, dtype=np.int8)
        order_keys = np.zeros(K + 2, dtype=np.int64)
        stamp = np.zeros(state.V, dtype=np.int64)
        src_free = np.zeros(max(len(env.sources), 1), dtype=np.int8)
        state.ictrl[krn.I_STEP] = 1
    while True:
        if mode == "async":
            status = krn._generate_async(
                state.variant, n, state.V, state.adj_indptr, state.adj_indices,
                state.src_idx, K, c, policy.kernel_code(), policy.p, divisor,
                horizon, tiebreak_code, stop_code, sc_tmin, sc_tmax, sc_robot,
                exp_pool, uni_pool, ev_t, ev_r, ev_k, logf,
                state.ch_e, state.ch_r, state.ch_c, state.ch_v,
                state.r_state, state.r_loc, state.r_depth, state.r_mark,
                state.r_src, state.v_settled, state.v_mobile, state.v_blocked,
                state.v_slowat, state.v_parent, state.v_nchild, state.v_nslowch,
                state.src_entrant, state.ictrl, state.fctrl,
            )
        else:
            status = krn._run_sync(
                n, state.V, state.adj_indptr, state.adj_indices, state.src_idx,
                K, c, policy.kernel_code(), policy.p, divisor, horizon,
                stop_code, 0, sc_tmin, sc_tmax, sc_robot, uni_pool,
                ev_t, ev_r, ev_k, logf,
                state.ch_e, state.ch_r, state.ch_c, state.ch_v,
                state.r_state, state.r_loc, state.r_depth, state.r_mark,
                state.r_src, state.v_settled, state.v_mobile, state.v_blocked,
                state.v_slowat, state.v_parent, state.v_nchild, state.v_nslowch,
                state.src_entrant, dec_act, dec_tgt, kind_buf, order_keys,
                stamp, src_free, state.ictrl, state.fctrl,
            )
        if status == krn.S_NEED_POOL:
            exp_pool = rng.standard_exponential(pool_chunk)
            uni_pool = rng.random(pool_chunk)
            state.ictrl[krn.I_PEXP] = 0
            state.ictrl[krn.I_PUNI] = 0
        elif status == krn.S_NEED_EVCAP:
            grow = np.zeros(len(ev_t), dtype=np.float64)
            ev_t = np.concatenate([ev_t, grow])
            ev_r = np.concatenate([ev_r, np.zeros(len(ev_r), dtype=np.int64)])
            ev_k = np.concatenate([ev_k, np.zeros(len(ev_k), dtype=np.int8)])
        elif status == krn.S_NEED_CHCAP:
            state.grow_changelog()
        elif status == krn.E_TRUNC:
            return None
        elif status == krn.E_CAPACITY:
            raise CapacityViolationError("capacity invariant violated in run")
        elif status == krn.E_LOGCAP:
            raise RuntimeError("change log overflow despite capacity pre-check")
        elif status in (krn.S_DONE_HORIZON, krn.S_DONE_SLOW):
            break
        else:
            raise RuntimeError(f"unexpected kernel status {status}")
    evn = int(state.ictrl[krn.I_EVN])
    S = EventOrder(
        times=ev_t[:evn].copy(),
        robots=ev_r[:evn].copy(),
        kinds=ev_k[:evn].copy(),
        horizon=horizon,
        max_index=int(state.ictrl[krn.I_NEXTG]) - 1,
        mode=mode,
    )
    return S, metrics(state, mode)


def replay(
    S: EventOrder,
    env: EnvironmentGraph,
    deletion_rule: str = "as-logged",
    log_changes: bool = False,
) -> RunResult:
    """Apply a logged event order to an environment.

    ``as-logged`` removes the robot's copy on every ActivationWithDeletion
    record, even if that copy is outside the graph or not moving;
    ``ignore-deletions`` treats those records as plain activations (the rule
    of the B process).  Synchronous orders are replayed step-by-step with the
    logged crashes on their own environment.
    """
    if deletion_rule not in ("as-logged", "ignore-deletions"):
        raise ValueError(f"unknown deletion rule {deletion_rule!r}")
    if S.mode == "sync":
        return _replay_sync(S, env, log_changes)
    K = max(S.max_index, 1)
    counts = np.bincount(S.robots, minlength=K + 1) if len(S) else np.zeros(K + 1)
    maxcnt = int(counts.max()) if len(S) else 0
    n = env.n if env.is_finite() else 0
    state = SimState(
        env,
        K,
        log_changes=log_changes,
        change_capacity=len(S) + 2 * n + 64,
        position_capacity=maxcnt + 4,
    )
    cross_idx = state.voff + 1 if env.variant == TASEP_B else -1
    ignore = 1 if deletion_rule == "ignore-deletions" else 0
    logf = 1 if log_changes else 0
    while True:
        status = krn._replay_events(
            state.variant, n, state.V, cross_idx, state.track_slow,
            state.lazy_map, state.adj_indptr, state.adj_indices, state.src_idx,
            K, S.times, S.robots, S.kinds, ignore, logf,
            state.ch_e, state.ch_r, state.ch_c, state.ch_v,
            state.r_state, state.r_loc, state.r_depth, state.r_mark,
            state.r_src, state.v_settled, state.v_mobile, state.v_blocked,
            state.v_slowat, state.v_parent, state.v_nchild, state.v_nslowch,
            state.src_entrant, state.cross_t, state.ictrl, state.fctrl,
        )
        if status == krn.S_NEED_CHCAP:
            state.grow_changelog()
            continue
        if status == krn.S_OK:
            break
        if status == krn.E_TRUNC:
            raise TruncationExceededError(
                f"event order references robot beyond truncation {K}"
            )
        if status == krn.E_VERTEX_OVERFLOW:
            raise VertexOverflowError("lazy path capacity exceeded in replay")
        if status == krn.E_CAPACITY:
            raise CapacityViolationError("capacity invariant violated in replay")
        raise RuntimeError(f"unexpected kernel status {status}")
    return metrics(state, S.mode)


def _replay_sync(S: EventOrder, env: EnvironmentGraph, log_changes: bool) -> RunResult:
    """Replay a synchronous order on its own environment (logged crashes)."""
    if not env.is_finite():
        raise ValueError("synchronous replay targets a finite environment")
    K = max(S.max_index, 1)
    n = env.n
    horizon = float(S.times[-1]) if len(S) else 0.0
    state = SimState(
        env,
        K,
        log_changes=log_changes,
        change_capacity=len(S) + 2 * n + 64,
        generate=True,
    )
    state.ictrl[krn.I_STEP] = 1
    dec_act = np.zeros(K + 2, dtype=np.int64)
    dec_tgt = np.zeros(K + 2, dtype=np.int64)
    kind_buf = np.zeros(K + 2, dtype=np.int8)
    order_keys = np.zeros(K + 2, dtype=np.int64)
    stamp = np.zeros(state.V, dtype=np.int64)
    src_free = np.zeros(max(len(env.sources), 1), dtype=np.int8)
    empty_f = np.zeros(0, dtype=np.float64)
    empty_i = np.zeros(0, dtype=np.int64)
    dummy_pool = np.zeros(8, dtype=np.float64)
    logf = 1 if log_changes else 0
    while True:
        status = krn._run_sync(
            n, state.V, state.adj_indptr, state.adj_indices, state.src_idx,
            K, 0.0, krn.P_NONE, 0.0, 2, horizon, 0, 1,
            empty_f, empty_f, empty_i, dummy_pool,
            S.times, S.robots, S.kinds, logf,
            state.ch_e, state.ch_r, state.ch_c, state.ch_v,
            state.r_state, state.r_loc, state.r_depth, state.r_mark,
            state.r_src, state.v_settled, state.v_mobile, state.v_blocked,
            state.v_slowat, state.v_parent, state.v_nchild, state.v_nslowch,
            state.src_entrant, dec_act, dec_tgt, kind_buf, order_keys,
            stamp, src_free, state.ictrl, state.fctrl,
        )
        if status == krn.S_NEED_CHCAP:
            state.grow_changelog()
            continue
        if status in (krn.S_DONE_HORIZON, krn.S_DONE_SLOW):
            break
        if status == krn.E_CAPACITY:
            raise CapacityViolationError("capacity invariant violated in replay")
        raise RuntimeError(f"unexpected kernel status {status}")
    return metrics(state, "sync")
