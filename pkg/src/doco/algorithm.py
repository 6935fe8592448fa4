"""
Distributed primal-dual mirror descent for online problems with time-varying constraints.

Each round t every agent i, using only information revealed at round t-1,

    a_{i,t} = grad f_{i,t-1}(x_{i,t-1}) + J g_{i,t-1}(x_{i,t-1})^T q_{i,t-1}
    y_{i,t} = argmin_{x in X} alpha_t <x, a_{i,t}> + D_R(x, x_{i,t-1})
    b_{i,t} = J g_{i,t-1}(x_{i,t-1}) (y_{i,t} - x_{i,t-1}) + g_{i,t-1}(x_{i,t-1})
    q_{i,t} = [q_{i,t-1} + gamma_t (b_{i,t} - beta_t q_{i,t-1})]_+

and the agents then mix x_{i,t} = sum_j W_ij y_{j,t}.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import network
from .mirror import FeasibleSet, MirrorMap, nonneg_project, regularized_projection
from .network import WeightMatrix
from .problems import OCOProblem

log = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-12
DUAL_BOUND_RTOL = 1e-12


class InvariantViolation(RuntimeError):
    def __init__(self, violation: "Violation"):
        super().__init__(violation.describe())
        self.violation = violation


@dataclass(frozen=True)
class Violation:
    check: str
    t: int
    i: int
    value: float
    bound: float

    def describe(self) -> str:
        return f"{self.check} violated at t={self.t}, i={self.i}: {self.value!r} > {self.bound!r}"

    def to_dict(self) -> dict:
        return {"check": self.check, "t": self.t, "i": self.i, "value": self.value, "bound": self.bound}


@dataclass(frozen=True)
class Schedule:
    """Step sizes alpha_t = t^-a, beta_t = t^-b, gamma_t = t^-(1-b) with 0 < b < a < 1."""

    a: float
    b: float

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.b < 1):
            raise ValueError(f"schedule exponents must lie in (0, 1), got a={self.a}, b={self.b}")
        if not self.a > self.b:
            raise ValueError(f"schedule needs a > b, got a={self.a}, b={self.b}")


def step_sizes(schedule: Schedule, t: int) -> tuple[float, float, float]:
    if t < 1:
        raise ValueError(f"step sizes are defined for t >= 1, got {t}")
    t = float(t)
    return t ** (-schedule.a), t ** (-schedule.b), t ** (-(1.0 - schedule.b))


@dataclass
class NodeState:
    x: np.ndarray
    y: np.ndarray
    q: np.ndarray


def initial_states(problem: OCOProblem) -> list[NodeState]:
    x0 = problem.X.initial_point()
    return [NodeState(x0.copy(), x0.copy(), np.zeros(problem.m)) for _ in range(problem.n)]


def primal_direction(grad_f, jac_g, q) -> np.ndarray:
    grad_f = np.asarray(grad_f, dtype=float)
    jac_g = np.atleast_2d(np.asarray(jac_g, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if jac_g.shape != (q.size, grad_f.size):
        raise ValueError(f"Jacobian shape {jac_g.shape} does not match q ({q.size}) and gradient ({grad_f.size})")
    return grad_f + jac_g.T @ q


def primal_update(mirror: MirrorMap, X: FeasibleSet, x_prev, a_dir, alpha: float) -> np.ndarray:
    return regularized_projection(mirror, X, x_prev, a_dir, alpha)


def constraint_surrogate(jac_g, y_new, x_prev, g_val) -> np.ndarray:
    """First-order expansion of g around x_prev evaluated at y_new."""
    jac_g = np.atleast_2d(np.asarray(jac_g, dtype=float))
    step = np.asarray(y_new, dtype=float) - np.asarray(x_prev, dtype=float)
    g_val = np.atleast_1d(np.asarray(g_val, dtype=float))
    if jac_g.shape != (g_val.size, step.size):
        raise ValueError(f"Jacobian shape {jac_g.shape} does not match g ({g_val.size}) and step ({step.size})")
    return jac_g @ step + g_val


def dual_update(q_prev, b_sur, gamma: float, beta: float) -> np.ndarray:
    q_prev = np.atleast_1d(np.asarray(q_prev, dtype=float))
    return nonneg_project(q_prev + gamma * (np.atleast_1d(b_sur) - beta * q_prev))


@dataclass
class RoundRecord:
    """Everything needed to replay round t offline.

    `f_obs` and `g_obs` are the values f_{i,t-1}(x_{i,t-1}), g_{i,t-1}(x_{i,t-1})
    observed at the start of the round; `x_prev` the actions they were taken at.
    """

    t: int
    alpha: float
    beta: float
    gamma: float
    x_prev: np.ndarray
    q_prev: np.ndarray
    grad_obs: np.ndarray
    jac_obs: np.ndarray
    f_obs: np.ndarray
    g_obs: np.ndarray
    a: np.ndarray
    y: np.ndarray
    b: np.ndarray
    q: np.ndarray
    x: np.ndarray


def _node_update(problem, mirror, t, alpha, beta, gamma, state: NodeState, i: int):
    x_prev = state.x
    grad = problem.grad_objective(i, t - 1, x_prev)
    jac = problem.jac_constraint(i, t - 1, x_prev)
    g_val = problem.eval_constraint(i, t - 1, x_prev)
    f_val = problem.eval_objective(i, t - 1, x_prev)
    a_dir = primal_direction(grad, jac, state.q)
    y = primal_update(mirror, problem.X, x_prev, a_dir, alpha)
    b_sur = constraint_surrogate(jac, y, x_prev, g_val)
    q = dual_update(state.q, b_sur, gamma, beta)
    return grad, jac, f_val, g_val, a_dir, y, b_sur, q


def run_round(states, problem: OCOProblem, W: WeightMatrix, mirror: MirrorMap, schedule: Schedule, t: int,
              executor: ThreadPoolExecutor | None = None):
    """One synchronous round. Returns the new node states and the round record."""
    alpha, beta, gamma = step_sizes(schedule, t)
    n = problem.n

    def work(i):
        return _node_update(problem, mirror, t, alpha, beta, gamma, states[i], i)

    if executor is None:
        results = [work(i) for i in range(n)]
    else:
        results = list(executor.map(work, range(n)))

    grads, jacs, f_obs, g_obs, a_dirs, ys, bs, qs = (np.array(col) for col in zip(*results))
    xs = network.mix(W, ys)
    new_states = [NodeState(xs[i], ys[i], qs[i]) for i in range(n)]
    record = RoundRecord(
        t=t, alpha=alpha, beta=beta, gamma=gamma,
        x_prev=np.array([s.x for s in states]), q_prev=np.array([s.q for s in states]),
        grad_obs=grads, jac_obs=jacs, f_obs=f_obs, g_obs=g_obs,
        a=a_dirs, y=ys, b=bs, q=qs, x=xs,
    )
    return new_states, record


@dataclass
class RunTrace:
    """Per-round records plus the post-hoc losses f_{i,t}(x_{i,t}), g_{i,t}(x_{i,t})."""

    n: int
    d: int
    m: int
    records: list = field(default_factory=list)
    f_own: np.ndarray | None = None  # (T, n)
    g_own: np.ndarray | None = None  # (T, n, m)
    x0: np.ndarray | None = None
    violations: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.records)

    def stack(self, name: str) -> np.ndarray:
        """Array of record attribute `name` over rounds 1..T."""
        return np.array([getattr(r, name) for r in self.records])

    @property
    def x(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, self.n, self.d))
        return self.stack("x")

    @property
    def steps(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, 3))
        return np.array([(r.alpha, r.beta, r.gamma) for r in self.records])


def check_round(record: RoundRecord, problem: OCOProblem, dual_bound_scale: float = 1.0) -> list[Violation]:
    """Dual nonnegativity, iterate membership and the dual norm bound ||q|| <= F / beta_t."""
    out = []
    X = problem.X
    bound = dual_bound_scale * problem.F / record.beta
    for i in range(problem.n):
        qmin = float(np.min(record.q[i]))
        if qmin < 0:
            out.append(Violation("dual_nonnegativity", record.t, i, -qmin, 0.0))
        if not X.contains(record.y[i], MEMBERSHIP_TOL):
            out.append(Violation("primal_membership_y", record.t, i, float(np.linalg.norm(record.y[i] - X.project(record.y[i]))), 0.0))
        if not X.contains(record.x[i], MEMBERSHIP_TOL):
            out.append(Violation("primal_membership_x", record.t, i, float(np.linalg.norm(record.x[i] - X.project(record.x[i]))), 0.0))
        qn = float(np.linalg.norm(record.q[i]))
        if qn > bound * (1 + DUAL_BOUND_RTOL):
            out.append(Violation("dual_norm_bound", record.t, i, qn, bound))
    return out


def run(problem: OCOProblem, W: WeightMatrix, mirror: MirrorMap, schedule: Schedule, *,
        T: int | None = None, strict: bool = True, threads: int = 1, hooks: dict | None = None) -> RunTrace:
    """Run T rounds (default: the problem horizon) from the standard initialization."""
    T = problem.T if T is None else T
    if T > problem.T:
        raise ValueError(f"horizon {T} exceeds the problem horizon {problem.T}")
    if W.n != problem.n:
        raise ValueError(f"weight matrix is for {W.n} agents, problem has {problem.n}")
    hooks = hooks or {}
    scale = float(hooks.get("corrupt_dual_bound", 1.0))
    states = initial_states(problem)
    trace = RunTrace(problem.n, problem.d, problem.m, x0=np.array([s.x for s in states]))
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    seen = set()
    try:
        for t in range(1, T + 1):
            states, record = run_round(states, problem, W, mirror, schedule, t, executor)
            trace.records.append(record)
            for v in check_round(record, problem, scale):
                if strict:
                    raise InvariantViolation(v)
                # first occurrence per check is a warning, repeats go to debug
                log.log(logging.DEBUG if v.check in seen else logging.WARNING, v.describe())
                seen.add(v.check)
                trace.violations.append(v)
    finally:
        if executor is not None:
            executor.shutdown()
    # losses of round t are revealed after the action; round t+1 already observed them
    if T > 0:
        last = np.array([s.x for s in states])
        f_last = np.array([problem.eval_objective(i, T, last[i]) for i in range(problem.n)])
        g_last = np.array([problem.eval_constraint(i, T, last[i]) for i in range(problem.n)])
        trace.f_own = np.vstack([trace.stack("f_obs")[1:], f_last[None]])
        trace.g_own = np.concatenate([trace.stack("g_obs")[1:], g_last[None]], axis=0)
    else:
        trace.f_own = np.zeros((0, problem.n))
        trace.g_own = np.zeros((0, problem.n, problem.m))
    return trace
