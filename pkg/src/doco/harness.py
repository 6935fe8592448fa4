"""Run pipeline and horizon sweeps shared by the CLI and the test suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import algorithm, evaluation
from .algorithm import RunTrace
from .build import Components, build
from .config import RunConfig
from .evaluation import Metrics

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    config: RunConfig
    parts: Components
    trace: RunTrace
    metrics: Metrics | None


def run_pipeline(cfg: RunConfig, *, with_metrics: bool = True) -> PipelineResult:
    """generate -> run -> evaluate. Invariant violations propagate in strict mode."""
    parts = build(cfg)
    trace = algorithm.run(parts.problem, parts.weights, parts.mirror, parts.schedule,
                          strict=cfg.strict, threads=cfg.threads, hooks=cfg.test_hooks)
    metrics = None
    if with_metrics:
        metrics = evaluation.evaluate(trace, parts.problem, parts.weights, parts.mirror, parts.schedule)
    return PipelineResult(cfg, parts, trace, metrics)


def parse_horizons(text: str) -> list[int]:
    """'8..13' -> [8, ..., 13]; '9,11,13' -> [9, 11, 13]. Values are log2 horizons."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(v) for v in text.split("..", 1))
        exps = list(range(lo, hi + 1))
    else:
        exps = [int(v) for v in text.split(",") if v.strip()]
    if not exps or min(exps) < 0 or exps != sorted(set(exps)):
        raise ValueError(f"bad horizon list {text!r}")
    return exps


@dataclass
class SeedSweep:
    seed: int
    horizons: list
    regret: np.ndarray
    fit: np.ndarray
    fit_sq: np.ndarray
    C_T_star: np.ndarray
    regret_rhs: np.ndarray
    fit_sq_rhs: np.ndarray
    regret_slope: float
    fit_slope: float

    @property
    def bounds_hold(self) -> bool:
        return bool(np.all(self.regret <= self.regret_rhs) and np.all(self.fit_sq <= self.fit_sq_rhs))


@dataclass
class SweepResult:
    horizons: list
    regret_exponent: float
    per_seed: list = field(default_factory=list)

    @property
    def regret_slope(self) -> float:
        return float(np.median([s.regret_slope for s in self.per_seed]))

    @property
    def fit_slope(self) -> float:
        return float(np.median([s.fit_slope for s in self.per_seed]))


def _slope(horizons, values) -> float:
    try:
        return evaluation.slope_estimate(list(zip(horizons, values)))
    except ValueError:
        return float("nan")


def sweep(cfg: RunConfig, exponents=range(8, 14), seeds: int = 1) -> SweepResult:
    """Log-log slopes of regret and fit over horizons 2**k.

    The step sizes do not depend on the horizon and the problem sequence is
    generated independently of T, so one run at the largest horizon contains
    every shorter run as a prefix. Each seed is run once at max(horizons).
    """
    horizons = [2**k for k in exponents]
    T_max = max(horizons)
    idx = np.array(horizons) - 1
    result = None
    for s in range(seeds):
        run_cfg = cfg.with_overrides(T=T_max, seed=cfg.seed + s)
        out = run_pipeline(run_cfg)
        m = out.metrics
        if result is None:
            result = SweepResult(horizons, m.constants.regret_exponent)
        result.per_seed.append(SeedSweep(
            seed=run_cfg.seed, horizons=horizons,
            regret=m.regret[idx], fit=m.fit[idx], fit_sq=m.fit_sq[idx], C_T_star=m.C_T_star[idx],
            regret_rhs=m.regret_rhs[idx], fit_sq_rhs=m.fit_sq_rhs[idx],
            regret_slope=_slope(horizons, m.regret[idx]), fit_slope=_slope(horizons, m.fit[idx]),
        ))
        log.info("sweep seed %d: regret slope %.3f, fit slope %.3f",
                 run_cfg.seed, result.per_seed[-1].regret_slope, result.per_seed[-1].fit_slope)
    return result
