"""Totally asymmetric simple exclusion with step initial condition.

Particle i starts at vertex 1-i with its own rate-1 exponential clock and
hops right when activated and unblocked.  ``run_tasep`` computes the exact
crossing times of the (v_0, v_1) edge for a given seed by propagating
per-particle jump times: particle i's j-th jump happens at its first clock
tick after both its own previous jump and the moment the particle ahead
vacated the target site.  This is exactly the outcome of replaying the
merged clock ticks on the ``tasep-b`` environment, which the test suite
asserts bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as krn
from .errors import InsufficientSamplesError, TruncationExceededError


@dataclass
class TasepTrajectory:
    """Crossing times of the (v_0, v_1) edge, one entry per particle."""

    crossing_times: np.ndarray
    t_max: float
    K: int
    seed: int | None = None

    def count_at(self, t: float) -> int:
        return int(np.searchsorted(self.crossing_times, t, side="right"))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.crossing_times:
                fh.write("%.17g\n" % t)

    @classmethod
    def load(cls, path: str) -> "TasepTrajectory":
        with open(path, "r", encoding="utf-8") as fh:
            xs = [float(line) for line in fh if line.strip()]
        arr = np.array(xs, dtype=np.float64)
        return cls(arr, t_max=float(arr[-1]) if len(arr) else 0.0, K=len(arr))


def default_truncation(t_max: float) -> int:
    """Crossings grow like t/4; half of t plus slack keeps the front clear."""
    return int(np.ceil(t_max / 2.0)) + 50


def particle_clock_times(seed: int, particle: int, t_max: float) -> np.ndarray:
    """All activation times <= t_max of one particle's rate-1 clock.

    Each particle owns an independent, reproducible substream so trajectories
    and the matching replayable event order draw identical values.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(particle,))
    rng = np.random.Generator(np.random.PCG64(ss))
    block = max(64, int(t_max + 6.0 * np.sqrt(t_max + 1.0) + 16))
    ticks = np.cumsum(rng.standard_exponential(block))
    while ticks[-1] <= t_max:
        more = rng.standard_exponential(block)
        more[0] += ticks[-1]
        ticks = np.concatenate([ticks, np.cumsum(more)])
    cut = int(np.searchsorted(ticks, t_max, side="right"))
    return ticks[:cut]


def run_tasep(
    t_max: float, K: int | None = None, seed: int = 0, strict: bool = True
) -> TasepTrajectory:
    """Crossing times of (v_0, v_1) up to t_max, exact per seed.

    With ``strict`` (the default), raises TruncationExceeded when particle
    A_K itself crosses the edge, since crossings of particles beyond the
    truncation would then be missing.  ``strict=False`` simulates exactly the
    K-particle system (the K=1 system has a single free particle).
    """
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    if K is None:
        K = default_truncation(t_max)
    if K < 1:
        raise ValueError("need at least one particle")
    crossings = []
    row = particle_clock_times(seed, 1, t_max)
    L = len(row)
    out = np.empty(max(L, 1), dtype=np.float64)
    i = 1
    while True:
        if L >= i:
            crossings.append(row[i - 1])
        else:
            break  # particle i never crosses; later particles cannot either
        if i == K:
            if strict:
                raise TruncationExceededError(
                    f"particle A_{K} crossed (v_0, v_1) before t_max; enlarge K"
                )
            break
        i += 1
        ticks = particle_clock_times(seed, i, t_max)
        if krn.NUMBA_ENABLED:
            L = int(krn._tasep_row(ticks, row, L, out))
        else:
            L = int(krn._tasep_row_numpy(ticks, row, L, out))
        row, out = out, row
        if len(out) < len(row):
            out = np.empty(len(row), dtype=np.float64)
    return TasepTrajectory(
        np.array(crossings, dtype=np.float64), t_max=t_max, K=K, seed=seed
    )


def build_event_order(seed: int, K: int, t_max: float):
    """The replayable event order matching ``run_tasep``: the merged clock
    ticks of particles 1..K, sorted by time (ties by particle index)."""
    from .engine import EventOrder

    all_t = []
    all_r = []
    for i in range(1, K + 1):
        ticks = particle_clock_times(seed, i, t_max)
        all_t.append(ticks)
        all_r.append(np.full(len(ticks), i, dtype=np.int64))
    times = np.concatenate(all_t) if all_t else np.zeros(0)
    robots = np.concatenate(all_r) if all_r else np.zeros(0, dtype=np.int64)
    order = np.lexsort((robots, times))
    return EventOrder(
        times=times[order],
        robots=robots[order],
        kinds=np.zeros(len(times), dtype=np.int8),
        horizon=t_max,
        max_index=K,
        mode="async",
    )


def throughput(traj: TasepTrajectory, t: float) -> float:
    """B_t / t, the particle current through (v_0, v_1); 0 at t = 0."""
    if t < 0 or t > traj.t_max:
        raise ValueError("t outside the trajectory horizon")
    if t == 0:
        return 0.0
    return traj.count_at(t) / t


def fluctuation_exponent(
    trajs: list[TasepTrajectory], t_grid: np.ndarray
) -> float:
    """Least-squares slope of log std(B_t - t/4) against log t."""
    if len(trajs) < 30:
        raise InsufficientSamplesError("need at least 30 trajectories")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    # a 30x span (just under 1.5 decades) is the canonical study window
    if len(t_grid) < 3 or t_grid.max() / t_grid.min() < 29.0:
        raise InsufficientSamplesError("t grid must span at least ~1.5 decades")
    stds = []
    for t in t_grid:
        devs = np.array([traj.count_at(t) - t / 4.0 for traj in trajs])
        stds.append(devs.std(ddof=1))
    stds = np.array(stds)
    if np.any(stds <= 0):
        raise InsufficientSamplesError("degenerate (zero-variance) trajectories")
    slope, _ = np.polyfit(np.log(t_grid), np.log(stds), 1)
    return float(slope)
