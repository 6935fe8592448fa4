"""
Time-varying local losses and constraints for the distributed online problem.

Agents are indexed 0..n-1 and rounds 0..T. Round 0 is the all-zero problem
used to initialize the algorithm. Every generated suite uses affine
constraints g_{i,t}(x) = A_i x - b_{i,t}, with b_{i,t} placed so a known
point is strictly feasible for every agent at every round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import named_rng
from .mirror import FeasibleSet

PROBLEM_KINDS = ("tracking", "regression")


class ProblemError(ValueError):
    pass


class OCOProblem:
    """Base class: a finite sequence of local losses f_{i,t} and constraints g_{i,t}.

    Subclasses implement the ``_f``, ``_grad_f``, ``_g`` and ``_jac_g`` hooks
    for t >= 1; the public accessors add index checks and the zero round.
    `F`, `G` and `L` are the declared bound, gradient-bound and Lipschitz
    constants.
    """

    def __init__(self, n: int, d: int, m: int, T: int, X: FeasibleSet, F: float, G: float, L: float):
        if n < 1 or d < 1 or m < 1 or T < 0:
            raise ProblemError(f"invalid problem sizes n={n}, d={d}, m={m}, T={T}")
        if X.dim != d:
            raise ProblemError(f"feasible set has dimension {X.dim}, problem has d={d}")
        self.n, self.d, self.m, self.T = n, d, m, T
        self.X = X
        self.F, self.G, self.L = float(F), float(G), float(L)

    def _check(self, i: int, t: int):
        if not 0 <= i < self.n:
            raise IndexError(f"agent index {i} outside [0, {self.n})")
        if not 0 <= t <= self.T:
            raise IndexError(f"round index {t} outside [0, {self.T}]")

    def eval_objective(self, i: int, t: int, x) -> float:
        self._check(i, t)
        if t == 0:
            return 0.0
        return float(self._f(i, t, np.asarray(x, dtype=float)))

    def grad_objective(self, i: int, t: int, x) -> np.ndarray:
        self._check(i, t)
        if t == 0:
            return np.zeros(self.d)
        return np.asarray(self._grad_f(i, t, np.asarray(x, dtype=float)), dtype=float)

    def eval_constraint(self, i: int, t: int, x) -> np.ndarray:
        self._check(i, t)
        if t == 0:
            return np.zeros(self.m)
        return np.asarray(self._g(i, t, np.asarray(x, dtype=float)), dtype=float)

    def jac_constraint(self, i: int, t: int, x) -> np.ndarray:
        self._check(i, t)
        if t == 0:
            return np.zeros((self.m, self.d))
        return np.asarray(self._jac_g(i, t, np.asarray(x, dtype=float)), dtype=float)

    # Batched evaluations used by the evaluation layer. Subclasses may override
    # these with vectorized versions; results must agree with the scalar path.

    def objective_cross(self, t: int, points) -> np.ndarray:
        """M[i, j] = f_{i,t}(points[j])."""
        points = np.atleast_2d(points)
        return np.array([[self.eval_objective(i, t, p) for p in points] for i in range(self.n)])

    def constraint_cross(self, t: int, points) -> np.ndarray:
        """M[i, j, :] = g_{i,t}(points[j])."""
        points = np.atleast_2d(points)
        return np.array([[self.eval_constraint(i, t, p) for p in points] for i in range(self.n)])

    def global_objective(self, t: int, x) -> float:
        """f_t(x) = (1/n) sum_i f_{i,t}(x)."""
        return float(np.mean(self.objective_cross(t, np.asarray(x, dtype=float)[None])[:, 0]))

    def global_gradient(self, t: int, x) -> np.ndarray:
        return np.mean([self.grad_objective(i, t, x) for i in range(self.n)], axis=0)

    def stacked_constraints(self, t: int, x) -> np.ndarray:
        """All agents' constraint values at one point, shape (n * m,)."""
        return self.constraint_cross(t, np.asarray(x, dtype=float)[None])[:, 0, :].ravel()

    def stacked_jacobian(self, t: int, x) -> np.ndarray:
        return np.vstack([self.jac_constraint(i, t, x) for i in range(self.n)])

    def _f(self, i, t, x):
        raise NotImplementedError

    def _grad_f(self, i, t, x):
        raise NotImplementedError

    def _g(self, i, t, x):
        raise NotImplementedError

    def _jac_g(self, i, t, x):
        raise NotImplementedError


class FunctionalProblem(OCOProblem):
    """Problem assembled from plain callables ``f(i, t, x)`` etc. (t >= 1)."""

    def __init__(self, n, d, m, T, X, f, grad_f, g, jac_g, F, G, L):
        super().__init__(n, d, m, T, X, F, G, L)
        self._f = f
        self._grad_f = grad_f
        self._g = g
        self._jac_g = jac_g


@dataclass
class SuiteSpec:
    """Parameters of a generated problem suite.

    `drift_delta` bounds the per-round displacement of each agent's anchor
    point, scaled by 1/t**drift_rho. `slack` is the range of signed
    distances between a constraint boundary and the mean anchor; negative
    values cut the unconstrained minimizer off.
    """

    kind: str = "tracking"
    n: int = 8
    d: int = 2
    m: int = 2
    T: int = 256
    drift_rho: float = 1.0
    drift_delta: float = 0.01
    seed: int = 0
    slack: tuple = (0.0, 0.0)
    orbit: float = 0.4

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ProblemError(f"unknown problem kind {self.kind!r}; expected one of {PROBLEM_KINDS}")
        if self.drift_rho < 0:
            raise ProblemError("drift_rho must be nonnegative")
        if self.drift_delta < 0:
            raise ProblemError("drift_delta must be nonnegative")
        if not 0 < self.orbit <= 0.4:
            raise ProblemError("orbit must lie in (0, 0.4]")
        lo, hi = self.slack
        if lo > hi:
            raise ProblemError("slack range is reversed")


def _unit(v):
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 0 else v


def _tangent_dirs(X: FeasibleSet, rng: np.random.Generator):
    """Random orthonormal pair (u, v) in the tangent space; v = 0 when it is 1-dimensional."""
    d = X.dim
    tdim = d - 1 if X.kind == "simplex" else d
    u = _unit(X.tangent(rng.standard_normal(d)))
    if tdim < 2:
        return u, np.zeros(d)
    v = X.tangent(rng.standard_normal(d))
    v = _unit(v - (v @ u) * u)
    return u, v


@dataclass
class _Anchors:
    """Per-agent points o_i + r_i (cos(theta_t + phi_i) u_i + sin(theta_t + phi_i) v_i)."""

    origin: np.ndarray  # (n, d)
    radius: np.ndarray  # (n,)
    phase0: np.ndarray  # (n,)
    u: np.ndarray  # (n, d)
    v: np.ndarray  # (n, d)
    theta: np.ndarray = field(repr=False)  # (T + 1,) shared phase

    def at(self, t: int) -> np.ndarray:
        ang = self.theta[t] + self.phase0
        return self.origin + self.radius[:, None] * (np.cos(ang)[:, None] * self.u + np.sin(ang)[:, None] * self.v)


def _make_anchors(spec: SuiteSpec, X: FeasibleSet, rng: np.random.Generator) -> _Anchors:
    """Agents orbit their own origins in a shared plane and phase, so the mean anchor
    moves as far as the individual ones."""
    n, d = spec.n, X.dim
    inr = X.inradius
    origin = np.empty((n, d))
    for i in range(n):
        w = X.tangent(rng.standard_normal(d))
        w = _unit(w) * rng.random() ** (1.0 / max(d, 1))
        origin[i] = X.center + 0.15 * inr * w
    u, v = _tangent_dirs(X, rng)
    r_max = spec.orbit * inr
    radius = r_max * rng.uniform(0.6, 1.0, n)
    steps = np.zeros(spec.T + 1)
    if spec.T > 0:
        s = np.arange(1, spec.T + 1, dtype=float)
        steps[1:] = spec.drift_delta / (r_max * s**spec.drift_rho)
    theta = rng.uniform(0.0, 2 * np.pi) + np.cumsum(steps)
    return _Anchors(origin, radius, np.zeros(n), np.tile(u, (n, 1)), np.tile(v, (n, 1)), theta)


def _make_constraint_rows(spec: SuiteSpec, X: FeasibleSet, rng: np.random.Generator):
    """Rows inside a 60-degree cone around -e, so x = anchor + kappa*e is strictly feasible."""
    n, m, d = spec.n, spec.m, X.dim
    e = _unit(X.tangent(rng.standard_normal(d)))
    A = np.empty((n, m, d))
    for i in range(n):
        for k in range(m):
            p = X.tangent(rng.standard_normal(d))
            p = p - (p @ e) * e
            nrm = np.linalg.norm(p)
            ang = rng.uniform(-np.pi / 3, np.pi / 3)
            row = -np.cos(ang) * e
            if nrm > 1e-12:
                row = row + np.sin(ang) * p / nrm
            A[i, k] = rng.uniform(0.5, 1.5) * row
    lo, hi = spec.slack
    slack = rng.uniform(lo, hi, (n, m)) if hi > lo else np.full((n, m), float(lo))
    return e, A, slack


class _AffineSuite(OCOProblem):
    """Shared machinery: anchors, affine constraints, analytic constants."""

    kappa_frac = 0.3

    def __init__(self, spec: SuiteSpec, X: FeasibleSet):
        self.spec = spec
        rng = named_rng(spec.seed, "problem")
        self.anchors = _make_anchors(spec, X, rng)
        self.feasible_dir, self.A, self.slack = _make_constraint_rows(spec, X, rng)
        self.kappa = self.kappa_frac * X.inradius
        if spec.slack[0] <= -0.5 * self.kappa:
            raise ProblemError(
                f"slack lower bound {spec.slack[0]} must exceed {-0.5 * self.kappa:.6g} to keep the suite feasible"
            )
        self._row_norms = np.linalg.norm(self.A, axis=2)  # (n, m)
        self._cache = None
        self._extra_init(rng, X)
        F, G, L = self.analytic_constants(X)
        super().__init__(spec.n, X.dim, spec.m, spec.T, X, F, G, L)

    def _extra_init(self, rng, X):
        pass

    def mean_anchor(self, t: int) -> np.ndarray:
        return self.anchors.at(t).mean(axis=0)

    def feasible_point(self, t: int) -> np.ndarray:
        """A point strictly feasible for every agent's constraints at round t."""
        return self.mean_anchor(t) + self.kappa * self.feasible_dir

    def offsets(self, t: int) -> np.ndarray:
        """b_{i,t}, shape (n, m)."""
        return self._round(t)[1]

    def _round(self, t: int):
        # single reference swap keeps concurrent readers consistent
        cache = self._cache
        if cache is None or cache[0] != t:
            anchors = self.anchors.at(t)
            b = self.A @ anchors.mean(axis=0) + self.slack * self._row_norms
            cache = (t, anchors, b)
            self._cache = cache
        return cache[1], cache[2]

    def _g(self, i, t, x):
        return self.A[i] @ x - self._round(t)[1][i]

    def _jac_g(self, i, t, x):
        return self.A[i].copy()

    def constraint_cross(self, t: int, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if t == 0:
            return np.zeros((self.n, points.shape[0], self.m))
        self._check(0, t)
        b = self._round(t)[1]
        return np.einsum("ikd,jd->ijk", self.A, points) - b[:, None, :]

    def stacked_jacobian(self, t: int, x) -> np.ndarray:
        self._check(0, t)
        if t == 0:
            return np.zeros((self.n * self.m, self.d))
        return self.A.reshape(self.n * self.m, self.d)

    def _constraint_constants(self, X):
        diam = X.diameter
        Fg = float(np.max(np.sqrt(np.sum((self._row_norms * (diam + np.abs(self.slack))) ** 2, axis=1))))
        Gg = float(max(np.linalg.norm(Ai, 2) for Ai in self.A))
        return Fg, Gg

    def analytic_constants(self, X):
        raise NotImplementedError


class TrackingProblem(_AffineSuite):
    """f_{i,t}(x) = 0.5 ||x - c_{i,t}||^2 with drifting targets c_{i,t} in X."""

    def targets(self, t: int) -> np.ndarray:
        return self._round(t)[0]

    def _f(self, i, t, x):
        diff = x - self._round(t)[0][i]
        return 0.5 * float(diff @ diff)

    def _grad_f(self, i, t, x):
        return x - self._round(t)[0][i]

    def objective_cross(self, t: int, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if t == 0:
            return np.zeros((self.n, points.shape[0]))
        self._check(0, t)
        c = self._round(t)[0]
        diff = points[None, :, :] - c[:, None, :]
        return 0.5 * np.sum(diff * diff, axis=2)

    def global_gradient(self, t: int, x) -> np.ndarray:
        self._check(0, t)
        if t == 0:
            return np.zeros(self.d)
        return np.asarray(x, dtype=float) - self._round(t)[0].mean(axis=0)

    def analytic_constants(self, X):
        diam = X.diameter
        Fg, Gg = self._constraint_constants(X)
        # targets lie in X, so ||x - c|| <= diam
        return max(0.5 * diam**2, Fg), max(diam, Gg), max(diam, Gg)


class RegressionProblem(_AffineSuite):
    """f_{i,t}(x) = 0.5 (<h_i, x> - z_{i,t})^2 with z_{i,t} = <h_i, c_{i,t}>; budget constraints."""

    def _extra_init(self, rng, X):
        h = X.tangent(rng.standard_normal((self.spec.n, X.dim)))
        h /= np.linalg.norm(h, axis=1, keepdims=True)
        self.h = h * rng.uniform(0.5, 1.5, (self.spec.n, 1))

    def responses(self, t: int) -> np.ndarray:
        c = self._round(t)[0]
        return np.einsum("id,id->i", self.h, c)

    def _f(self, i, t, x):
        r = self.h[i] @ x - self.h[i] @ self._round(t)[0][i]
        return 0.5 * float(r * r)

    def _grad_f(self, i, t, x):
        r = self.h[i] @ x - self.h[i] @ self._round(t)[0][i]
        return r * self.h[i]

    def objective_cross(self, t: int, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if t == 0:
            return np.zeros((self.n, points.shape[0]))
        self._check(0, t)
        r = self.h @ points.T - self.responses(t)[:, None]
        return 0.5 * r * r

    def global_gradient(self, t: int, x) -> np.ndarray:
        self._check(0, t)
        if t == 0:
            return np.zeros(self.d)
        r = self.h @ np.asarray(x, dtype=float) - self.responses(t)
        return (r[:, None] * self.h).mean(axis=0)

    def analytic_constants(self, X):
        diam = X.diameter
        hmax = float(np.max(np.linalg.norm(self.h, axis=1)))
        Fg, Gg = self._constraint_constants(X)
        # |<h, x - c>| <= ||h|| diam with c in X
        Ff = 0.5 * (hmax * diam) ** 2
        Gf = hmax**2 * diam
        return max(Ff, Fg), max(Gf, Gg), max(Gf, Gg)


def generate(spec: SuiteSpec, X: FeasibleSet) -> _AffineSuite:
    """Deterministic problem suite for `spec` on `X`."""
    if spec.kind == "tracking":
        return TrackingProblem(spec, X)
    return RegressionProblem(spec, X)


@dataclass
class ConstantsReport:
    F: float
    G: float
    L: float
    passed: bool
    declared: tuple


def certify_constants(problem: OCOProblem, samples: int, rng: np.random.Generator | None = None) -> ConstantsReport:
    """Sampled audit of the declared F, G, L.

    Draws `samples` random (i, t, x, y) tuples with t >= 1 and records the
    largest function value, gradient norm (spectral norm for Jacobians) and
    difference quotient seen. Passes when the declared constants dominate.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = rng if rng is not None else np.random.default_rng(0)
    X = problem.X
    Fe = Ge = Le = 0.0
    T = max(problem.T, 1)
    for _ in range(samples):
        i = int(rng.integers(problem.n))
        t = int(rng.integers(1, T + 1)) if problem.T >= 1 else 0
        x, y = X.sample(rng, 2)
        fx, fy = problem.eval_objective(i, t, x), problem.eval_objective(i, t, y)
        gx, gy = problem.eval_constraint(i, t, x), problem.eval_constraint(i, t, y)
        Fe = max(Fe, abs(fx), float(np.linalg.norm(gx)))
        Ge = max(
            Ge,
            float(np.linalg.norm(problem.grad_objective(i, t, x))),
            float(np.linalg.norm(problem.jac_constraint(i, t, x), 2)),
        )
        dist = float(np.linalg.norm(x - y))
        if dist > 1e-12:
            Le = max(Le, abs(fx - fy) / dist, float(np.linalg.norm(gx - gy)) / dist)
    slack = 1e-12
    passed = (
        Fe <= problem.F * (1 + slack) + slack
        and Ge <= problem.G * (1 + slack) + slack
        and Le <= problem.L * (1 + slack) + slack
    )
    return ConstantsReport(Fe, Ge, Le, passed, (problem.F, problem.G, problem.L))
