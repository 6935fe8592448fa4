"""
Comparator sequence, dynamic regret, fit, and the bound checks that go with them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, nnls

from .algorithm import RunTrace, Schedule, step_sizes
from .mirror import FeasibleSet, MirrorMap
from .network import WeightMatrix
from .problems import OCOProblem

log = logging.getLogger(__name__)

COMPARATOR_TOL = 1e-7
MAX_ITER = 10_000
CONSENSUS_ATOL = 1e-9


class ComparatorError(RuntimeError):
    """The constrained per-round minimizer could not be computed."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# Comparator
# ---------------------------------------------------------------------------


def _set_constraints(X: FeasibleSet):
    if X.kind == "box":
        return list(zip(X.lo, X.hi)), []
    if X.kind == "ball":
        c, r = X.center_point, X.radius
        return None, [{
            "type": "ineq",
            "fun": lambda x: np.array([r * r - (x - c) @ (x - c)]),
            "jac": lambda x: -2.0 * (x - c)[None, :],
        }]
    ones = np.ones(X.dim)
    return [(0.0, 1.0)] * X.dim, [{
        "type": "eq",
        "fun": lambda x: np.array([x.sum() - 1.0]),
        "jac": lambda x: ones[None, :],
    }]


def _stationarity(problem: OCOProblem, t: int, x: np.ndarray) -> float:
    """Gradient-mapping norm ||x - P_X(x - grad L(x, lam))|| with nonnegative
    multipliers fitted by NNLS on the near-active constraints."""
    grad = problem.global_gradient(t, x)
    g = problem.stacked_constraints(t, x)
    active = g > -1e-6
    if active.any():
        J = problem.stacked_jacobian(t, x)[active]
        lam, _ = nnls(J.T, -grad)
        grad = grad + J.T @ lam
    return float(np.linalg.norm(x - problem.X.project(x - grad)))


def comparator_oracle(problem: OCOProblem, t: int, tol: float = COMPARATOR_TOL, x0=None):
    """Minimizer of f_t over {x in X : g_{i,t}(x) <= 0 for all i}.

    Returns ``(x_star, diagnostics)``. Starts from the set center unless `x0`
    is given, which fixes the choice among minimizers when there are several.
    """
    X = problem.X
    bounds, set_cons = _set_constraints(X)
    cons = set_cons + [{
        "type": "ineq",
        "fun": lambda x: -problem.stacked_constraints(t, x),
        "jac": lambda x: -problem.stacked_jacobian(t, x),
    }]
    start = X.center if x0 is None else np.asarray(x0, dtype=float)
    res = minimize(
        lambda x: problem.global_objective(t, x),
        start,
        jac=lambda x: problem.global_gradient(t, x),
        method="SLSQP",
        bounds=bounds,
        constraints=cons,
        options={"ftol": 1e-14, "maxiter": MAX_ITER},
    )
    x = X.project(res.x)
    violation = float(max(np.max(problem.stacked_constraints(t, x)), 0.0))
    diag = {
        "t": t,
        "iterations": int(res.nit),
        "status": int(res.status),
        "message": str(res.message),
        "violation": violation,
        "gradient_mapping": _stationarity(problem, t, x),
    }
    if not res.success and res.status != 8 or violation > tol:
        # status 8 = positive directional derivative in line search, usually at the optimum
        raise ComparatorError(f"comparator solve failed at t={t}: {res.message}", diag)
    if res.status == 8 and diag["gradient_mapping"] > 1e-5:
        raise ComparatorError(f"comparator solve stalled at t={t}: {res.message}", diag)
    return x, diag


@dataclass
class ComparatorPath:
    x_star: np.ndarray  # (T, d), row t-1 is x*_t
    iterations: np.ndarray
    gradient_mapping: np.ndarray
    violation: np.ndarray

    @property
    def T(self) -> int:
        return self.x_star.shape[0]

    @property
    def C_T_star(self) -> float:
        return path_variation(self)

    def prefix_variation(self) -> np.ndarray:
        """C*_{T'} for every prefix T' = 1..T (with x*_{T'+1} := x*_{T'})."""
        if self.T == 0:
            return np.zeros(0)
        steps = np.linalg.norm(np.diff(self.x_star, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])


def solve_comparators(problem: OCOProblem, T: int | None = None, tol: float = COMPARATOR_TOL) -> ComparatorPath:
    T = problem.T if T is None else T
    xs = np.zeros((T, problem.d))
    its = np.zeros(T, dtype=int)
    gm = np.zeros(T)
    viol = np.zeros(T)
    for t in range(1, T + 1):
        x, diag = comparator_oracle(problem, t, tol)
        xs[t - 1], its[t - 1] = x, diag["iterations"]
        gm[t - 1], viol[t - 1] = diag["gradient_mapping"], diag["violation"]
    return ComparatorPath(xs, its, gm, viol)


def path_variation(path) -> float:
    """sum_t ||x*_{t+1} - x*_t||, the final displacement counted as zero."""
    xs = path.x_star if isinstance(path, ComparatorPath) else np.asarray(path, dtype=float)
    if len(xs) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(xs, axis=0), axis=1)))


# ---------------------------------------------------------------------------
# Regret and fit
# ---------------------------------------------------------------------------


def network_losses(trace: RunTrace, problem: OCOProblem) -> np.ndarray:
    """L[t-1, i] = f_t(x_{i,t}), the network-average loss at agent i's action."""
    xs = trace.x
    return np.array([problem.objective_cross(t, xs[t - 1]).mean(axis=0) for t in range(1, trace.T + 1)]).reshape(trace.T, trace.n)


def dynamic_regret(trace: RunTrace, path: ComparatorPath, problem: OCOProblem) -> np.ndarray:
    """Prefix sums of (1/n) sum_i f_t(x_{i,t}) - f_t(x*_t)."""
    if path.T < trace.T or trace.n != problem.n:
        raise ValueError("trace, comparator path and problem disagree on (n, T)")
    losses = network_losses(trace, problem)
    best = np.array([problem.global_objective(t, path.x_star[t - 1]) for t in range(1, trace.T + 1)])
    return regret_from_values(losses, best)


def regret_from_values(losses, best) -> np.ndarray:
    """Prefix regret from per-(t, i) loss values and per-t comparator values."""
    losses = np.asarray(losses, dtype=float).reshape(len(best), -1)
    return np.cumsum(losses.mean(axis=1) - np.asarray(best, dtype=float))


@dataclass
class FitSeries:
    fit: np.ndarray  # (1/n^2) sum_ij ||[S_ij]_+||
    fit_sq: np.ndarray  # (1/n^2) sum_ij ||[S_ij]_+||^2
    fit_diag: np.ndarray  # (1/n) sum_i ||[S_ii]_+||


def fit_from_values(gvals) -> FitSeries:
    """Fit series from constraint values gvals[t-1, i, j, :] = g_{i,t}(x_{j,t})."""
    gvals = np.asarray(gvals, dtype=float)
    T = gvals.shape[0]
    fit, fit_sq, fit_diag = np.zeros(T), np.zeros(T), np.zeros(T)
    if T == 0:
        return FitSeries(fit, fit_sq, fit_diag)
    n = gvals.shape[1]
    running = np.zeros(gvals.shape[1:])
    idx = np.arange(n)
    for k in range(T):
        running += gvals[k]
        norms = np.linalg.norm(np.maximum(running, 0.0), axis=-1)
        fit[k] = norms.mean()
        fit_sq[k] = np.mean(norms**2)
        fit_diag[k] = norms[idx, idx].mean()
    return FitSeries(fit, fit_sq, fit_diag)


def constraint_values(trace: RunTrace, problem: OCOProblem) -> np.ndarray:
    xs = trace.x
    if trace.T == 0:
        return np.zeros((0, problem.n, problem.n, problem.m))
    return np.array([problem.constraint_cross(t, xs[t - 1]) for t in range(1, trace.T + 1)])


def fit(trace: RunTrace, problem: OCOProblem) -> np.ndarray:
    """Prefix values of (1/n) sum_i (1/n) sum_j ||[sum_t g_{i,t}(x_{j,t})]_+||."""
    return fit_from_values(constraint_values(trace, problem)).fit


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundConstants:
    F: float
    G: float
    L: float
    K: float
    mu: float
    diameter: float
    n: int
    sigma2: float
    a: float
    b: float
    B1: float
    R: float
    R1: float
    D: float
    D1: float
    D2: float
    D3: float

    @property
    def regret_exponent(self) -> float:
        return max(self.a, 1.0 - self.a + self.b)

    @property
    def fit_sq_exponents(self) -> tuple[float, float, float]:
        return (2.0 - self.b, 1.0 + self.a - self.b, 2.0 + 2.0 * self.b - 2.0 * self.a)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def bound_constants(F, G, L, K, mu, diameter, n, sigma2, a, b) -> BoundConstants:
    if not 0 < b < a < 1:
        raise ValueError(f"bound constants need 0 < b < a < 1, got a={a}, b={b}")
    B1 = 2 * F + G * diameter
    R = 4 * F * L * G * np.sqrt(n) * sigma2 / (mu * (1 - a) * (1 - sigma2)) if sigma2 > 0 else 0.0
    R1 = R + B1**2 / (2 * b) + G**2 / (mu * (1 - a)) + 2 * K * diameter
    D = 2 + 4 * G**2 / (mu * (1 - a)) + 2 / (1 - b)
    D1 = 2 * D * (2 * F + 2 * K * diameter + B1**2 / (2 * b) + G**2 / (mu * (1 - a)) + 2 * K * diameter)
    D2 = 4 * K * D
    D3 = 16 * L**2 * R**2
    return BoundConstants(float(F), float(G), float(L), float(K), float(mu), float(diameter), int(n),
                          float(sigma2), float(a), float(b), float(B1), float(R), float(R1), float(D),
                          float(D1), float(D2), float(D3))


def constants_for(problem: OCOProblem, mirror: MirrorMap, W: WeightMatrix, schedule: Schedule) -> BoundConstants:
    return bound_constants(problem.F, problem.G, problem.L, mirror.K, mirror.mu, problem.X.diameter,
                           problem.n, W.sigma2, schedule.a, schedule.b)


def theorem1_bounds(c: BoundConstants, T, C_T_star) -> tuple:
    """Right-hand sides (regret, squared fit) at horizon T; vectorizes over T."""
    T = np.asarray(T, dtype=float)
    C = np.asarray(C_T_star, dtype=float)
    e1, e2, e3 = c.fit_sq_exponents
    regret_rhs = c.R1 * T**c.regret_exponent + 2 * c.K * T**c.a * C
    fit_sq_rhs = c.D1 * T**e1 + c.D2 * T**e2 * C + c.D3 * T**e3
    if regret_rhs.ndim == 0:
        return float(regret_rhs), float(fit_sq_rhs)
    return regret_rhs, fit_sq_rhs


@dataclass
class ConsensusCheck:
    error: np.ndarray  # (T, n) ||x_{i,t} - xbar_t||
    rhs: np.ndarray  # (T,)
    passed: bool
    worst_margin: float  # max over (t, i) of error - rhs
    violations: list = field(default_factory=list)


def consensus_rhs(T: int, c: BoundConstants, schedule: Schedule) -> np.ndarray:
    """sum_{tau=0}^{t-1} sqrt(n) s^(t-tau) (G alpha_{tau+1}/mu)(1 + F/beta_{tau+1}) for t = 1..T."""
    out = np.zeros(T)
    acc = 0.0
    s = c.sigma2
    for t in range(1, T + 1):
        alpha, beta, _ = step_sizes(schedule, t)
        acc = s * (acc + np.sqrt(c.n) * c.G * alpha / c.mu * (1.0 + c.F / beta))
        out[t - 1] = acc
    return out


def consensus_error_check(trace: RunTrace, c: BoundConstants, schedule: Schedule, atol: float = CONSENSUS_ATOL) -> ConsensusCheck:
    xs = trace.x
    err = np.linalg.norm(xs - xs.mean(axis=1, keepdims=True), axis=2) if trace.T else np.zeros((0, trace.n))
    rhs = consensus_rhs(trace.T, c, schedule)
    margin = err - rhs[:, None]
    bad = np.argwhere(margin > atol)
    violations = [(int(t) + 1, int(i), float(margin[t, i])) for t, i in bad[:20]]
    worst = float(margin.max()) if margin.size else 0.0
    return ConsensusCheck(err, rhs, bad.size == 0, worst, violations)


# ---------------------------------------------------------------------------
# Slopes and the full metric bundle
# ---------------------------------------------------------------------------


def slope_estimate(values) -> float:
    """Least-squares slope of log(metric) against log(T) over (T, metric) pairs."""
    pts = [(float(T), float(v)) for T, v in values]
    usable = [(T, v) for T, v in pts if v > 0 and T > 0]
    if len(usable) < len(pts):
        log.warning("slope_estimate: dropped %d nonpositive points", len(pts) - len(usable))
    if len(usable) < 2:
        raise ValueError("slope_estimate needs at least two positive (T, metric) points")
    lt, lv = np.log(np.array(usable)).T
    return float(np.polyfit(lt, lv, 1)[0])


@dataclass
class Metrics:
    regret: np.ndarray
    fit: np.ndarray
    fit_sq: np.ndarray
    fit_diag: np.ndarray
    C_T_star: np.ndarray
    regret_rhs: np.ndarray
    fit_sq_rhs: np.ndarray
    consensus: ConsensusCheck
    constants: BoundConstants
    path: ComparatorPath

    @property
    def T(self) -> int:
        return self.regret.size

    def bounds_hold(self) -> bool:
        return bool(np.all(self.regret <= self.regret_rhs) and np.all(self.fit_sq <= self.fit_sq_rhs))

    def rows(self, horizons=None):
        """Rows (T, regret, fit, fit_sq, C_T_star, regret_rhs, fit_sq_rhs, fit_diag)."""
        horizons = range(1, self.T + 1) if horizons is None else horizons
        for T in horizons:
            k = T - 1
            yield (T, self.regret[k], self.fit[k], self.fit_sq[k], self.C_T_star[k],
                   self.regret_rhs[k], self.fit_sq_rhs[k], self.fit_diag[k])


METRIC_COLUMNS = ("T", "regret", "fit", "fit_sq", "C_T_star", "regret_rhs", "fit_sq_rhs", "fit_diag")


def evaluate(trace: RunTrace, problem: OCOProblem, W: WeightMatrix, mirror: MirrorMap, schedule: Schedule,
             path: ComparatorPath | None = None) -> Metrics:
    c = constants_for(problem, mirror, W, schedule)
    if path is None:
        path = solve_comparators(problem, trace.T)
    regret = dynamic_regret(trace, path, problem) if trace.T else np.zeros(0)
    fits = fit_from_values(constraint_values(trace, problem))
    C = path.prefix_variation()[: trace.T]
    horizons = np.arange(1, trace.T + 1)
    if trace.T:
        regret_rhs, fit_sq_rhs = theorem1_bounds(c, horizons, C)
    else:
        regret_rhs = fit_sq_rhs = np.zeros(0)
    cons = consensus_error_check(trace, c, schedule)
    return Metrics(regret, fits.fit, fits.fit_sq, fits.fit_diag, C, regret_rhs, fit_sq_rhs, cons, c, path)
