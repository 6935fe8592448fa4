"""Construct the run components from a validated configuration."""

from __future__ import annotations

from dataclasses import dataclass

from . import network
from ._rng import named_rng
from .algorithm import Schedule
from .mirror import FeasibleSet, MirrorMap, make_mirror_map
from .network import Topology, WeightMatrix
from .problems import OCOProblem, SuiteSpec, generate


def _as_dict(cfg):
    return cfg if isinstance(cfg, dict) else cfg.to_dict()


def topology_for(cfg) -> Topology:
    cfg = _as_dict(cfg)
    return network.build_topology(cfg["graph"], cfg["problem"]["n"], named_rng(cfg["seed"] if cfg["seed"] is not None else cfg["problem"]["seed"], "graph"))


@dataclass
class Components:
    topology: Topology
    weights: WeightMatrix
    X: FeasibleSet
    mirror: MirrorMap
    problem: OCOProblem
    schedule: Schedule


def build(cfg) -> Components:
    raw = _as_dict(cfg)
    topo = topology_for(raw)
    if "weights" in raw["graph"]:
        W = WeightMatrix.from_matrix(raw["graph"]["weights"], topo)
    else:
        W = network.build_metropolis_weights(topo)
    pr = raw["problem"]
    X = FeasibleSet.from_spec(raw["feasible_set"], pr["d"])
    mirror = make_mirror_map(raw["mirror"], X)
    spec = SuiteSpec(
        kind=pr["kind"], n=pr["n"], d=pr["d"], m=pr["m"], T=pr["T"],
        drift_rho=float(pr["drift_rho"]), drift_delta=float(pr["drift_delta"]),
        seed=raw["seed"], slack=tuple(pr["slack"]), orbit=float(pr["orbit"]),
    )
    problem = generate(spec, X)
    sched = Schedule(float(raw["schedule"]["a"]), float(raw["schedule"]["b"]))
    return Components(topo, W, X, mirror, problem, sched)
