"""Budgeted crash policies.

A policy decides, at each movement attempt of the generative run, whether the
moving robot is deleted.  Cumulative crashes before time t never exceed
floor(c*t/rate_divisor), with divisor 4 in asynchronous and 2 in synchronous
time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels as krn
from .errors import ScriptBudgetViolationError

_KIND_CODE = {
    "none": krn.P_NONE,
    "random": krn.P_RANDOM,
    "eager": krn.P_EAGER,
    "scripted": krn.P_SCRIPTED,
}


@dataclass(frozen=True)
class AdversaryPolicy:
    kind: str = "none"
    p: float = 1.0  # crash probability per attempt for kind "random"
    c: float = 0.0
    rate_divisor: int = 4
    script: tuple[tuple[float, float, int], ...] = field(default=())

    def kernel_code(self) -> int:
        return _KIND_CODE[self.kind]

    def script_arrays(self):
        if self.script:
            tmin = np.array([e[0] for e in self.script], dtype=np.float64)
            tmax = np.array([e[1] for e in self.script], dtype=np.float64)
            rob = np.array([e[2] for e in self.script], dtype=np.int64)
        else:
            tmin = np.zeros(0, dtype=np.float64)
            tmax = np.zeros(0, dtype=np.float64)
            rob = np.zeros(0, dtype=np.int64)
        return tmin, tmax, rob


def budget(c: float, t: float, rate_divisor: int) -> int:
    """Crashes allowed before time t: floor(c*t/divisor)."""
    if not (0.0 <= c < 1.0):
        raise ValueError("c must be in [0, 1)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return int(krn._budget(c, t, rate_divisor))


def decide_crash(
    policy: AdversaryPolicy,
    robot: int,
    t: float,
    crashes_so_far: int,
    u: float = 1.0,
) -> bool:
    """Whether this movement attempt crashes.  ``u`` is the seeded uniform
    consumed by the random policy (callers in the hot loop pass pool draws)."""
    if crashes_so_far + 1 > budget(policy.c, t, policy.rate_divisor):
        return False
    if policy.kind == "none":
        return False
    if policy.kind == "random":
        return u < policy.p
    if policy.kind == "eager":
        return True
    if policy.kind == "scripted":
        tmin, tmax, rob = policy.script_arrays()
        return bool(krn._script_match(t, robot, tmin, tmax, rob))
    raise ValueError(f"unknown policy kind {policy.kind!r}")


def _check_script_feasible(script, c, rate_divisor):
    """Reject schedules that demand more crashes than the budget can cover.

    The j-th crash (entries ordered by window end) can happen no later than
    its window end, so j must fit the budget there.
    """
    ordered = sorted(script, key=lambda e: e[1])
    for j, (tmin, tmax, robot) in enumerate(ordered, start=1):
        if tmax < tmin:
            raise ScriptBudgetViolationError(f"window ({tmin},{tmax}) is empty")
        if j > budget(c, tmax, rate_divisor):
            raise ScriptBudgetViolationError(
                f"entry {j} (robot {robot}, window end {tmax}) exceeds "
                f"budget {budget(c, tmax, rate_divisor)}"
            )


def make_policy(
    kind: str,
    c: float,
    mode: str = "async",
    p: float = 1.0,
    script=None,
) -> AdversaryPolicy:
    divisor = 4 if mode == "async" else 2
    if kind not in _KIND_CODE:
        raise ValueError(f"unknown adversary kind {kind!r}")
    entries = tuple((float(a), float(b), int(r)) for a, b, r in (script or ()))
    if kind == "scripted":
        _check_script_feasible(entries, c, divisor)
    return AdversaryPolicy(kind=kind, p=p, c=c, rate_divisor=divisor, script=entries)


def load_script_file(path: str) -> list[tuple[float, float, int]]:
    """Scripted policy file: JSON list of {t_min, t_max, robot_index}."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [(float(e["t_min"]), float(e["t_max"]), int(e["robot_index"])) for e in data]
