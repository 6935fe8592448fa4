import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doco import algorithm, mirror, network
from doco.algorithm import InvariantViolation, Schedule
from doco.problems import FunctionalProblem
from helpers import make_suite, unit_box

RING8 = network.build_metropolis_weights(network.ring(8))
EU_BOX = mirror.make_mirror_map("euclidean", unit_box())


# -- step sizes and single-step operations ---------------------------------------


def test_step_sizes():
    assert algorithm.step_sizes(Schedule(0.7, 0.2), 1) == (1.0, 1.0, 1.0)
    np.testing.assert_allclose(algorithm.step_sizes(Schedule(0.5, 0.25), 16), (0.25, 0.5, 0.125), rtol=1e-15)
    with pytest.raises(ValueError):
        algorithm.step_sizes(Schedule(0.5, 0.25), 0)


@pytest.mark.parametrize("a,b", [(0.3, 0.5), (0.5, 0.5), (1.0, 0.5), (0.5, 0.0)])
def test_schedule_rejects_invalid_exponents(a, b):
    with pytest.raises(ValueError):
        Schedule(a, b)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.integers(1, 10_000))
def test_step_sizes_positive_nonincreasing(a, b, t):
    if not a > b:
        return
    s = Schedule(a, b)
    now, nxt = algorithm.step_sizes(s, t), algorithm.step_sizes(s, t + 1)
    assert all(v > 0 for v in now) and all(u >= v for u, v in zip(now, nxt))


def test_primal_direction_examples():
    np.testing.assert_array_equal(algorithm.primal_direction([1.0, 2.0], [[3.0, 4.0]], [0.0]), [1.0, 2.0])
    np.testing.assert_array_equal(algorithm.primal_direction([1.0, 2.0], [[3.0, 4.0]], [2.0]), [7.0, 10.0])
    np.testing.assert_array_equal(algorithm.primal_direction([0.0, 0.0], np.eye(2), [1.0, 1.0]), [1.0, 1.0])
    with pytest.raises(ValueError):
        algorithm.primal_direction([1.0, 2.0], [[3.0, 4.0, 5.0]], [1.0])


def test_primal_update_examples():
    z = np.array([0.5, 0.5])
    np.testing.assert_array_equal(algorithm.primal_update(EU_BOX, unit_box(), z, np.zeros(2), 0.3), z)
    np.testing.assert_allclose(algorithm.primal_update(EU_BOX, unit_box(), z, [1.0, 0.0], 1.0), [0.0, 0.5])
    S = mirror.FeasibleSet.simplex(2)
    ent = mirror.make_mirror_map("negative_entropy", S)
    np.testing.assert_allclose(algorithm.primal_update(ent, S, z, [np.log(2), 0.0], 1.0), [1 / 3, 2 / 3], atol=1e-15)


def test_constraint_surrogate_examples():
    np.testing.assert_array_equal(algorithm.constraint_surrogate([[1.0, 2.0]], [0.3, 0.3], [0.3, 0.3], [-0.4]), [-0.4])
    np.testing.assert_allclose(algorithm.constraint_surrogate([[1.0, 0.0]], [0.5, 0.5], [0.0, 0.0], [-0.2]), [0.3],
                               atol=1e-15)
    np.testing.assert_array_equal(algorithm.constraint_surrogate(np.zeros((1, 2)), [0.9, 0.1], [0.2, 0.2], [0.0]), [0.0])
    with pytest.raises(ValueError):
        algorithm.constraint_surrogate([[1.0, 0.0]], [0.5, 0.5], [0.0, 0.0], [0.1, 0.2])


def test_dual_update_examples():
    np.testing.assert_array_equal(algorithm.dual_update([0.0], [0.0], 0.3, 0.3), [0.0])
    # 1 + 0.5 * (-2 - 0.5) = -0.25, clamped
    np.testing.assert_array_equal(algorithm.dual_update([1.0], [-2.0], 0.5, 0.5), [0.0])
    # 0.5 + 0.1 * (1 - 0.2 * 0.5) = 0.59
    np.testing.assert_allclose(algorithm.dual_update([0.5], [1.0], 0.1, 0.2), [0.59], atol=1e-15)


# -- rounds -----------------------------------------------------------------------


def test_first_round_is_forced_by_zero_initialization():
    p = make_suite(T=4)
    states = algorithm.initial_states(p)
    new, rec = algorithm.run_round(states, p, RING8, EU_BOX, Schedule(2 / 3, 1 / 3), 1)
    x0 = np.array([s.x for s in states])
    np.testing.assert_array_equal(rec.a, 0.0)
    np.testing.assert_array_equal(rec.y, x0)
    np.testing.assert_array_equal(rec.b, 0.0)
    np.testing.assert_array_equal(rec.q, 0.0)
    np.testing.assert_array_equal(rec.x, RING8.w @ x0)


def scalar_problem(lo, hi, T):
    X = mirror.FeasibleSet.box([lo], [hi])
    return FunctionalProblem(
        1, 1, 1, T, X,
        f=lambda i, t, x: float(x[0]), grad_f=lambda i, t, x: np.ones(1),
        g=lambda i, t, x: np.array([-1.0]), jac_g=lambda i, t, x: np.zeros((1, 1)),
        F=max(abs(lo), abs(hi), 1.0), G=1.0, L=1.0,
    )


def scalar_hand_simulation(x0, lo, hi, a, T):
    # round 1 sees the zero function; afterwards plain projected steps of size t^-a on f(x) = x
    xs, x = [], x0
    for t in range(1, T + 1):
        if t > 1:
            x = min(max(x - t ** (-a), lo), hi)
        xs.append(x)
    return xs


@pytest.mark.parametrize("lo,hi", [(0.0, 1.0), (0.2, 3.0), (-1.0, 1.0)])
def test_single_node_scalar_run_matches_hand_simulation(lo, hi):
    p = scalar_problem(lo, hi, 5)
    W = network.WeightMatrix.from_matrix([[1.0]])
    M = mirror.make_mirror_map("euclidean", p.X)
    tr = algorithm.run(p, W, M, Schedule(0.5, 0.25))
    got = tr.x[:, 0, 0]
    want = scalar_hand_simulation(p.X.initial_point()[0], lo, hi, 0.5, 5)
    np.testing.assert_allclose(got, want, atol=1e-15, rtol=0)
    assert np.all(np.diff(got) <= 0)
    np.testing.assert_array_equal(tr.stack("q"), 0.0)


def test_hand_simulation_literal_values():
    # frozen from the scalar oracle on X = [0.2, 3]: 1.6, 1.6 - 2^-1/2, then - 3^-1/2, then clipped
    p = scalar_problem(0.2, 3.0, 5)
    tr = algorithm.run(p, network.WeightMatrix.from_matrix([[1.0]]), mirror.make_mirror_map("euclidean", p.X),
                       Schedule(0.5, 0.25))
    np.testing.assert_allclose(tr.x[:, 0, 0], [1.6, 0.8928932188134525, 0.3155429496238267, 0.2, 0.2], atol=1e-15)


def _targets(t):
    return np.array([0.5 + 0.3 * np.cos(t / 10), 0.5 + 0.3 * np.sin(t / 7)])


def test_single_node_unconstrained_matches_plain_mirror_descent():
    T = 100
    X = unit_box()
    p = FunctionalProblem(
        1, 2, 1, T, X,
        f=lambda i, t, x: 0.5 * float(np.sum((x - _targets(t)) ** 2)), grad_f=lambda i, t, x: x - _targets(t),
        g=lambda i, t, x: np.array([-1.0]), jac_g=lambda i, t, x: np.zeros((1, 2)), F=1.0, G=np.sqrt(2), L=np.sqrt(2),
    )
    tr = algorithm.run(p, network.WeightMatrix.from_matrix([[1.0]]), EU_BOX, Schedule(2 / 3, 1 / 3))
    # independent online gradient descent with the same one-step delay
    x = np.zeros(2)
    ref = []
    for t in range(1, T + 1):
        grad = np.zeros(2) if t == 1 else x - _targets(t - 1)
        x = np.clip(x - t ** (-2 / 3) * grad, 0.0, 1.0)
        ref.append(x)
    assert np.max(np.abs(tr.x[:, 0] - np.array(ref))) <= 1e-12


def test_single_node_entropy_matches_multiplicative_weights():
    T = 100
    S = mirror.FeasibleSet.simplex(3)
    losses = np.random.default_rng(0).uniform(0, 1, (T + 1, 3))
    p = FunctionalProblem(
        1, 3, 1, T, S,
        f=lambda i, t, x: float(losses[t] @ x), grad_f=lambda i, t, x: losses[t].copy(),
        g=lambda i, t, x: np.array([-1.0]), jac_g=lambda i, t, x: np.zeros((1, 3)), F=1.0, G=np.sqrt(3), L=np.sqrt(3),
    )
    ent = mirror.make_mirror_map("negative_entropy", S)
    tr = algorithm.run(p, network.WeightMatrix.from_matrix([[1.0]]), ent, Schedule(2 / 3, 1 / 3))
    x = np.full(3, 1 / 3)
    ref = []
    for t in range(1, T + 1):
        if t > 1:
            w = x * np.exp(-(t ** (-2 / 3)) * losses[t - 1])
            x = w / w.sum()
        ref.append(x)
    assert np.min(ref) > 1e-3  # floor never active, so the oracle is plain multiplicative weights
    assert np.max(np.abs(tr.x[:, 0] - np.array(ref))) <= 1e-12


class RecordingSuite:
    """Wraps a problem and records the round index of every query."""

    def __init__(self, inner):
        self.inner = inner
        self.queries = []

    def __getattr__(self, name):
        attr = getattr(self.inner, name)
        if name in ("eval_objective", "grad_objective", "eval_constraint", "jac_constraint"):
            def wrapped(i, t, x):
                self.queries.append(t)
                return attr(i, t, x)
            return wrapped
        return attr


def test_round_t_only_queries_round_t_minus_one():
    p = RecordingSuite(make_suite(T=20))
    states = algorithm.initial_states(p.inner)
    sched = Schedule(2 / 3, 1 / 3)
    for t in range(1, 21):
        p.queries.clear()
        states, _ = algorithm.run_round(states, p, RING8, EU_BOX, sched, t)
        assert p.queries and set(p.queries) == {t - 1}


def test_record_replays_bitwise():
    p = make_suite(T=30, slack=(-0.01, 0.0))
    tr = algorithm.run(p, RING8, EU_BOX, Schedule(2 / 3, 1 / 3))
    for r in tr.records[::7]:
        for i in range(p.n):
            a = algorithm.primal_direction(r.grad_obs[i], r.jac_obs[i], r.q_prev[i])
            y = algorithm.primal_update(EU_BOX, p.X, r.x_prev[i], a, r.alpha)
            b = algorithm.constraint_surrogate(r.jac_obs[i], y, r.x_prev[i], r.g_obs[i])
            q = algorithm.dual_update(r.q_prev[i], b, r.gamma, r.beta)
            assert np.array_equal(a, r.a[i]) and np.array_equal(y, r.y[i])
            assert np.array_equal(b, r.b[i]) and np.array_equal(q, r.q[i])
        assert np.array_equal(network.mix(RING8, r.y), r.x)


# -- full runs ------------------------------------------------------------------


def test_zero_horizon_gives_empty_trace():
    p = make_suite(T=0)
    tr = algorithm.run(p, RING8, EU_BOX, Schedule(2 / 3, 1 / 3))
    assert tr.T == 0 and tr.x.shape == (0, 8, 2) and tr.f_own.shape == (0, 8)


def test_runs_are_deterministic_and_thread_independent():
    sched = Schedule(2 / 3, 1 / 3)
    t1 = algorithm.run(make_suite(T=60, seed=9), RING8, EU_BOX, sched)
    t2 = algorithm.run(make_suite(T=60, seed=9), RING8, EU_BOX, sched)
    t3 = algorithm.run(make_suite(T=60, seed=9), RING8, EU_BOX, sched, threads=4)
    for name in ("x", "y", "q", "a", "b"):
        assert np.array_equal(t1.stack(name), t2.stack(name))
        assert np.array_equal(t1.stack(name), t3.stack(name))


def test_shorter_horizon_is_a_bitwise_prefix():
    sched = Schedule(2 / 3, 1 / 3)
    short = algorithm.run(make_suite(T=40, seed=1), RING8, EU_BOX, sched)
    long = algorithm.run(make_suite(T=90, seed=1), RING8, EU_BOX, sched)
    assert np.array_equal(short.x, long.x[:40])
    assert np.array_equal(short.stack("q"), long.stack("q")[:40])
    assert np.array_equal(short.f_own, long.f_own[:40])


def test_post_hoc_losses_are_own_losses():
    p = make_suite(T=25)
    tr = algorithm.run(p, RING8, EU_BOX, Schedule(2 / 3, 1 / 3))
    for t in (1, 13, 25):
        for i in range(p.n):
            assert tr.f_own[t - 1, i] == p.eval_objective(i, t, tr.x[t - 1, i])
            np.testing.assert_array_equal(tr.g_own[t - 1, i], p.eval_constraint(i, t, tr.x[t - 1, i]))


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(["ring", "star", "path"]), st.sampled_from(["tracking", "regression"]))
def test_invariants_hold_on_suite_runs(seed, graph, kind):
    p = make_suite(T=200, seed=seed, kind=kind, slack=(-0.03, 0.03))
    W = network.build_metropolis_weights(network.build_topology({"kind": graph}, 8))
    tr = algorithm.run(p, W, EU_BOX, Schedule(2 / 3, 1 / 3), strict=True)
    q = tr.stack("q")
    assert q.min() >= 0.0
    bound = p.F / tr.steps[:, 1]
    assert np.all(np.linalg.norm(q, axis=2) <= bound[:, None] * (1 + 1e-12))
    assert all(p.X.contains(v) for v in tr.stack("y").reshape(-1, 2))
    assert all(p.X.contains(v) for v in tr.x.reshape(-1, 2))


def test_entropy_runs_stay_on_floored_simplex():
    S = mirror.FeasibleSet.simplex(3)
    p = make_suite(T=150, X=S, d=3, slack=(-0.02, 0.0))
    ent = mirror.make_mirror_map("negative_entropy", S)
    tr = algorithm.run(p, RING8, ent, Schedule(2 / 3, 1 / 3))
    assert tr.stack("y").min() >= ent.eps * (1 - 1e-12)
    assert tr.x.min() >= ent.eps * (1 - 1e-12)
    np.testing.assert_allclose(tr.x.sum(axis=2), 1.0, atol=1e-12)


def test_strict_mode_aborts_and_audit_mode_records():
    sched = Schedule(2 / 3, 1 / 3)
    with pytest.raises(InvariantViolation) as err:
        algorithm.run(make_suite(T=50), RING8, EU_BOX, sched, hooks={"corrupt_dual_bound": 0.0})
    v = err.value.violation
    assert v.check == "dual_norm_bound" and v.t >= 1 and 0 <= v.i < 8
    tr = algorithm.run(make_suite(T=50), RING8, EU_BOX, sched, strict=False, hooks={"corrupt_dual_bound": 0.0})
    assert tr.T == 50 and tr.violations
    assert {v.check for v in tr.violations} == {"dual_norm_bound"}


def test_run_rejects_mismatched_inputs():
    with pytest.raises(ValueError):
        algorithm.run(make_suite(T=5), network.build_metropolis_weights(network.ring(4)), EU_BOX, Schedule(0.6, 0.3))
    with pytest.raises(ValueError):
        algorithm.run(make_suite(T=5), RING8, EU_BOX, Schedule(0.6, 0.3), T=6)
