"""Discrete-event simulator and verification harness for uniform dispersal
of crash-prone robot swarms on graph environments."""

__version__ = "0.1.0"

from .envs import (
    EnvironmentGraph,
    grid_environment,
    infinite_path,
    load_bundled_map,
    load_env_spec,
    parse_graph_file,
    parse_grid_map,
    path_graph,
)
from .engine import EventOrder, MeaningfulTimes, generate_run, meaningful_times, replay
from .adversary import AdversaryPolicy, budget, decide_crash, make_policy
from .dispersal import RunResult, SimState

__all__ = [
    "EnvironmentGraph",
    "EventOrder",
    "MeaningfulTimes",
    "RunResult",
    "SimState",
    "AdversaryPolicy",
    "budget",
    "decide_crash",
    "make_policy",
    "generate_run",
    "replay",
    "meaningful_times",
    "grid_environment",
    "infinite_path",
    "load_bundled_map",
    "load_env_spec",
    "parse_graph_file",
    "parse_grid_map",
    "path_graph",
]
