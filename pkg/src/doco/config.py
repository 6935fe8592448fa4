"""
Run configuration: strict JSON schema, defaults and whole-config validation.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from . import network
from .mirror import MAP_KINDS, SET_KINDS
from .problems import PROBLEM_KINDS

DEFAULTS = {
    "graph": {"kind": "ring"},
    "mirror": "euclidean",
    "feasible_set": {"kind": "box", "lo": 0.0, "hi": 1.0},
    "problem": {
        "kind": "tracking",
        "n": 8,
        "d": 2,
        "m": 2,
        "T": 256,
        "drift_rho": 1.0,
        "drift_delta": 0.01,
        "seed": 0,
        "slack": [0.0, 0.0],
        "orbit": 0.4,
    },
    "schedule": {"a": 2.0 / 3.0, "b": 1.0 / 3.0},
    "seed": None,
    "mode": "strict",
    "threads": 1,
    "out": None,
    "test_hooks": {},
}

TOP_KEYS = set(DEFAULTS)
GRAPH_KEYS = {"kind", "p", "edges", "weights"}
SET_KEYS = {"kind", "lo", "hi", "center", "radius"}
PROBLEM_KEYS = set(DEFAULTS["problem"])
SCHEDULE_KEYS = {"a", "b"}
HOOK_KEYS = {"corrupt_dual_bound"}


class ConfigError(ValueError):
    """Invalid run configuration; `keys` names the offending entries."""

    def __init__(self, message: str, keys=()):
        super().__init__(message)
        self.keys = list(keys)


@dataclass
class RunConfig:
    graph: dict
    mirror: str
    feasible_set: dict
    problem: dict
    schedule: dict
    seed: int
    mode: str
    threads: int
    out: str | None
    test_hooks: dict

    @property
    def T(self) -> int:
        return int(self.problem["T"])

    @property
    def strict(self) -> bool:
        return self.mode == "strict"

    def to_dict(self) -> dict:
        return {
            "graph": copy.deepcopy(self.graph),
            "mirror": self.mirror,
            "feasible_set": copy.deepcopy(self.feasible_set),
            "problem": copy.deepcopy(self.problem),
            "schedule": dict(self.schedule),
            "seed": self.seed,
            "mode": self.mode,
            "threads": self.threads,
            "out": self.out,
            "test_hooks": dict(self.test_hooks),
        }

    def with_overrides(self, **kw) -> "RunConfig":
        raw = self.to_dict()
        for key, value in kw.items():
            if value is None:
                continue
            if key == "T":
                raw["problem"]["T"] = int(value)
            elif key == "seed":
                raw["seed"] = int(value)
                raw["problem"]["seed"] = int(value)
            elif key in ("drift_rho", "drift_delta"):
                raw["problem"][key] = value
            else:
                raw[key] = value
        return parse_config(raw)


def _unknown(section: str, given: dict, allowed: set):
    extra = sorted(set(given) - allowed)
    if extra:
        names = [f"{section}.{k}" if section else k for k in extra]
        raise ConfigError(f"unknown config key(s): {', '.join(names)}", names)


def _number(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}", [key])
    return value


def _integer(value, key, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}", [key])
    if lo is not None and value < lo:
        raise ConfigError(f"{key} must be >= {lo}, got {value}", [key])
    return value


def parse_config(raw: dict) -> RunConfig:
    """Validate a config mapping and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _unknown("", raw, TOP_KEYS)
    cfg = copy.deepcopy(DEFAULTS)
    for key in ("graph", "feasible_set", "problem", "schedule", "test_hooks"):
        if key in raw:
            if not isinstance(raw[key], dict):
                raise ConfigError(f"{key} must be an object", [key])
    _unknown("graph", raw.get("graph", {}), GRAPH_KEYS)
    _unknown("feasible_set", raw.get("feasible_set", {}), SET_KEYS)
    _unknown("problem", raw.get("problem", {}), PROBLEM_KEYS)
    _unknown("schedule", raw.get("schedule", {}), SCHEDULE_KEYS)
    _unknown("test_hooks", raw.get("test_hooks", {}), HOOK_KEYS)

    if "graph" in raw:
        cfg["graph"] = dict(raw["graph"])
    if "feasible_set" in raw:
        cfg["feasible_set"] = dict(raw["feasible_set"])
    cfg["problem"].update(raw.get("problem", {}))
    cfg["schedule"].update(raw.get("schedule", {}))
    for key in ("mirror", "seed", "mode", "threads", "out", "test_hooks"):
        if key in raw:
            cfg[key] = raw[key]

    g = cfg["graph"]
    if g.get("kind") not in network.GRAPH_KINDS:
        raise ConfigError(f"graph.kind must be one of {network.GRAPH_KINDS}, got {g.get('kind')!r}", ["graph.kind"])
    if g["kind"] == "explicit" and "edges" not in g:
        raise ConfigError("explicit graphs need graph.edges", ["graph.edges"])
    if "p" in g:
        p = _number(g["p"], "graph.p")
        if not 0 <= p <= 1:
            raise ConfigError("graph.p must lie in [0, 1]", ["graph.p"])

    if cfg["mirror"] not in MAP_KINDS:
        raise ConfigError(f"mirror must be one of {MAP_KINDS}, got {cfg['mirror']!r}", ["mirror"])
    fs = cfg["feasible_set"]
    if fs.get("kind") not in SET_KINDS:
        raise ConfigError(f"feasible_set.kind must be one of {SET_KINDS}, got {fs.get('kind')!r}", ["feasible_set.kind"])
    if cfg["mirror"] == "negative_entropy" and fs["kind"] != "simplex":
        raise ConfigError("negative_entropy mirror map needs feasible_set.kind = simplex", ["mirror", "feasible_set.kind"])

    pr = cfg["problem"]
    if pr["kind"] not in PROBLEM_KINDS:
        raise ConfigError(f"problem.kind must be one of {PROBLEM_KINDS}, got {pr['kind']!r}", ["problem.kind"])
    for key in ("n", "d", "m"):
        _integer(pr[key], f"problem.{key}", lo=1)
    _integer(pr["T"], "problem.T", lo=0)
    _integer(pr["seed"], "problem.seed")
    if fs["kind"] == "simplex" and pr["d"] < 2:
        raise ConfigError("simplex feasible sets need problem.d >= 2", ["problem.d"])
    for key in ("drift_rho", "drift_delta", "orbit"):
        if _number(pr[key], f"problem.{key}") < 0:
            raise ConfigError(f"problem.{key} must be nonnegative", [f"problem.{key}"])
    sl = pr["slack"]
    if not (isinstance(sl, (list, tuple)) and len(sl) == 2):
        raise ConfigError("problem.slack must be a [lo, hi] pair", ["problem.slack"])
    _number(sl[0], "problem.slack"), _number(sl[1], "problem.slack")
    pr["slack"] = [float(sl[0]), float(sl[1])]

    sch = cfg["schedule"]
    a = _number(sch["a"], "schedule.a")
    b = _number(sch["b"], "schedule.b")
    if not (0 < a < 1 and 0 < b < 1 and a > b):
        raise ConfigError(f"schedule needs 0 < b < a < 1, got a={a}, b={b}", ["schedule.a", "schedule.b"])

    if cfg["seed"] is None:
        cfg["seed"] = pr["seed"]
    _integer(cfg["seed"], "seed")
    pr["seed"] = cfg["seed"]
    if cfg["mode"] not in ("strict", "audit"):
        raise ConfigError(f"mode must be 'strict' or 'audit', got {cfg['mode']!r}", ["mode"])
    _integer(cfg["threads"], "threads", lo=1)
    if "corrupt_dual_bound" in cfg["test_hooks"]:
        _number(cfg["test_hooks"]["corrupt_dual_bound"], "test_hooks.corrupt_dual_bound")

    # connectivity is part of whole-config validation
    from .build import topology_for  # local import avoids a cycle

    try:
        topology_for(cfg).require_connected()
    except network.GraphError as exc:
        raise ConfigError(str(exc), ["graph"]) from exc
    return RunConfig(**cfg)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", ["<file>"]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}", ["<file>"]) from exc
    return parse_config(raw)
