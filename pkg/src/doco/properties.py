"""Sampled property audits run by `doco check`.

Each audit returns a CheckResult; `worst` is the largest observed violation
(nonpositive or below the tolerance means the property held on every sample).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import algorithm, evaluation, network
from ._rng import named_rng
from .build import Components
from .problems import certify_constants
from .mirror import (FeasibleSet, MirrorMap, bregman, floor_to_simplex, nonneg_project, project,
                     regularized_projection, three_point_gap)

TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    samples: int
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return f"{status}  {self.name:<32} worst={self.worst:.3e} samples={self.samples}{extra}"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "worst": self.worst, "samples": self.samples, "note": self.note}


def _result(name, worst, samples, tol=TOL, note=""):
    return CheckResult(name, bool(worst <= tol), float(worst), int(samples), note)


def domain_points(mirror: MirrorMap, X: FeasibleSet, rng, size: int) -> np.ndarray:
    """Random points where the mirror map's constants apply (floored simplex for entropy)."""
    pts = X.sample(rng, size)
    if mirror.kind == "negative_entropy":
        pts = np.array([floor_to_simplex(p, mirror.eps) for p in pts])
    return pts


# -- network -----------------------------------------------------------------


def check_weights(W: network.WeightMatrix, rng, samples: int = 100) -> list[CheckResult]:
    w = W.w
    stoch = max(np.abs(w.sum(axis=0) - 1).max(), np.abs(w.sum(axis=1) - 1).max())
    sym = float(np.abs(w - w.T).max())
    mags = np.sort(np.abs(np.linalg.eigvals(w)))[::-1]
    brute = mags[1] if W.n > 1 else 0.0
    avg = contr = -np.inf
    for _ in range(samples):
        ys = rng.standard_normal((W.n, 3))
        out = network.mix(W, ys)
        avg = max(avg, float(np.abs(out.mean(axis=0) - ys.mean(axis=0)).max()))
        dev_in = np.linalg.norm(ys - ys.mean(axis=0))
        dev_out = np.linalg.norm(out - ys.mean(axis=0))
        contr = max(contr, dev_out - W.sigma2 * dev_in)
    return [
        _result("weights_doubly_stochastic", stoch, 1, tol=1e-12),
        _result("weights_symmetric", sym, 1, tol=0.0),
        _result("spectral_gap_vs_eigvals", abs(W.sigma2 - brute), 1),
        _result("mix_preserves_average", avg, samples, tol=1e-12),
        _result("mix_contraction", contr, samples, tol=1e-12),
    ]


# -- mirror map --------------------------------------------------------------


def check_mirror(mirror: MirrorMap, X: FeasibleSet, rng, samples: int = 1000) -> list[CheckResult]:
    pts = domain_points(mirror, X, rng, 3 * samples).reshape(samples, 3, X.dim)
    lower = sep = lip = bnd = -np.inf
    for x, y, z in pts:
        dxy = bregman(mirror, x, y)
        lower = max(lower, 0.5 * mirror.mu * float((x - y) @ (x - y)) - dxy)
        lip = max(lip, abs(dxy - bregman(mirror, z, y)) - mirror.K * float(np.linalg.norm(x - z)))
        bnd = max(bnd, dxy - mirror.K * X.diameter)
        k = int(rng.integers(2, 4))
        ys = domain_points(mirror, X, rng, k)
        wts = rng.dirichlet(np.ones(k))
        sep = max(sep, bregman(mirror, x, wts @ ys) - sum(wi * bregman(mirror, x, yi) for wi, yi in zip(wts, ys)))

    calls = max(samples // 10, 1)
    three = -np.inf
    for _ in range(calls):
        z = domain_points(mirror, X, rng, 1)[0]
        a = rng.standard_normal(X.dim) * rng.uniform(0.1, 5.0)
        alpha = float(rng.uniform(0.01, 2.0))
        y = regularized_projection(mirror, X, z, a, alpha)
        three = max(three, three_point_gap(mirror, z, a, alpha, y, domain_points(mirror, X, rng, 100)))

    nonexp = orth = -np.inf
    for _ in range(samples):
        u, v = rng.standard_normal((2, X.dim)) * 2.0 + X.center
        nonexp = max(nonexp, float(np.linalg.norm(project(X, u) - project(X, v)) - np.linalg.norm(u - v)))
        orth = max(orth, float(np.linalg.norm(nonneg_project(u - X.center) - nonneg_project(v - X.center))
                               - np.linalg.norm(u - v)))
    return [
        _result("bregman_lower_bound", lower, samples),
        _result("bregman_separate_convexity", sep, samples),
        _result("bregman_lipschitz", lip, samples),
        _result("bregman_bounded", bnd, samples),
        _result("regularized_projection_three_point", three, calls * 100),
        _result("projection_nonexpansive", nonexp, samples, tol=1e-12),
        _result("orthant_projection_nonexpansive", orth, samples, tol=1e-12),
    ]


# -- problem suite -----------------------------------------------------------


def check_problem(problem, rng, samples: int = 1000, pairs: int = 500) -> list[CheckResult]:
    rep = certify_constants(problem, samples, rng)
    excess = max(rep.F - problem.F, rep.G - problem.G, rep.L - problem.L)
    out = [_result("declared_constants_dominate", excess, samples, tol=1e-12,
                   note=f"empirical F={rep.F:.3g} G={rep.G:.3g} L={rep.L:.3g}")]

    T = max(problem.T, 1)
    cvx = -np.inf
    for _ in range(pairs):
        i = int(rng.integers(problem.n))
        t = int(rng.integers(1, T + 1)) if problem.T else 0
        x, y = problem.X.sample(rng, 2)
        mid = 0.5 * (x + y)
        cvx = max(cvx, problem.eval_objective(i, t, mid) - 0.5 * (problem.eval_objective(i, t, x) + problem.eval_objective(i, t, y)))
        gap = problem.eval_constraint(i, t, mid) - 0.5 * (problem.eval_constraint(i, t, x) + problem.eval_constraint(i, t, y))
        cvx = max(cvx, float(gap.max()))
    out.append(_result("midpoint_convexity", cvx, pairs))

    if hasattr(problem, "feasible_point") and problem.T:
        worst = -np.inf
        for t in range(1, problem.T + 1):
            xt = problem.feasible_point(t)
            worst = max(worst, float(problem.constraint_cross(t, xt).max()))
        out.append(CheckResult("constructed_point_feasible", worst < 0, worst, problem.T))
    return out


# -- engine and evaluation ---------------------------------------------------


def check_engine(parts: Components, T: int) -> list[CheckResult]:
    p = parts.problem
    T = min(T, p.T)
    trace = algorithm.run(p, parts.weights, parts.mirror, parts.schedule, T=T, strict=False)
    out = [CheckResult("engine_invariants", not trace.violations, float(len(trace.violations)), T * p.n,
                       note="dual sign, membership, dual norm bound")]
    c = evaluation.constants_for(p, parts.mirror, parts.weights, parts.schedule)
    cons = evaluation.consensus_error_check(trace, c, parts.schedule)
    out.append(CheckResult("consensus_error_bound", cons.passed, cons.worst_margin, T * p.n))
    return out


def grid_minimum(problem, t: int, step: float = 1e-3):
    """Brute-force constrained minimizer over a grid of the bounding box (d = 2)."""
    X = problem.X
    if X.kind == "box":
        lo, hi = X.lo, X.hi
    elif X.kind == "ball":
        lo, hi = X.center_point - X.radius, X.center_point + X.radius
    else:
        lo, hi = np.zeros(2), np.ones(2)
    g0 = np.arange(lo[0], hi[0] + step / 2, step)
    g1 = np.arange(lo[1], hi[1] + step / 2, step)
    P = np.stack(np.meshgrid(g0, g1, indexing="ij"), axis=-1).reshape(-1, 2)
    if X.kind == "ball":
        P = P[np.linalg.norm(P - X.center_point, axis=1) <= X.radius]
    elif X.kind == "simplex":
        P = np.column_stack([g0, 1.0 - g0])
    vals = problem.objective_cross(t, P).mean(axis=0)
    feas = np.all(problem.constraint_cross(t, P) <= 0, axis=(0, 2))
    if not feas.any():
        raise ValueError(f"no feasible grid point at t={t}")
    k = np.argmin(np.where(feas, vals, np.inf))
    return P[k], float(vals[k])


def check_comparator(problem, rng, rounds: int = 20) -> list[CheckResult]:
    if problem.d != 2 or problem.T < 1:
        return [CheckResult("comparator_vs_grid", True, 0.0, 0, note="skipped: needs d = 2 and T >= 1")]
    ts = np.sort(rng.choice(np.arange(1, problem.T + 1), size=min(rounds, problem.T), replace=False))
    gap = -np.inf
    for t in ts:
        x, _ = evaluation.comparator_oracle(problem, int(t))
        _, best = grid_minimum(problem, int(t))
        gap = max(gap, problem.global_objective(int(t), x) - best)
    return [_result("comparator_vs_grid", gap, len(ts), tol=1e-3)]


def run_all(parts: Components, seed: int, samples: int = 1000, engine_T: int = 256,
            grid_rounds: int = 20) -> list[CheckResult]:
    rng = named_rng(seed, "property-tests")
    results = list(itertools.chain(
        check_weights(parts.weights, rng),
        check_mirror(parts.mirror, parts.X, rng, samples),
        check_problem(parts.problem, rng, samples),
        check_engine(parts, engine_T),
        check_comparator(parts.problem, rng, grid_rounds),
    ))
    return results
