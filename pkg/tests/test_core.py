import math

import numpy as np
import pytest

from siadqr import diagnostics as diag
from siadqr.core import (DEFAULT_BETA, TRACE_COLUMNS, InvalidConfig, ProblemInstance, SolverConfig,
                         SolverState, Termination, dual_update, mu_schedule, sigma_schedule, solve,
                         stopping_check, w_coordinate_target, w_sweep, z_update)
from siadqr.datagen import ScenarioConfig, gen_trial
from siadqr.penalties import PenaltyParams, penalty_eval
from siadqr.smoothing import h_grad, smoothed_abs

from test_smoothing import brute_min

MCP = PenaltyParams("MCP", 0.055, 2.1)
SCAD = PenaltyParams("SCAD", 0.055, 3.1)


def random_problem(n, P, seed=0, tau=0.7):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, P))
    y = X @ rng.standard_normal(P) + 0.3 * rng.standard_normal(n)
    return ProblemInstance(X, y, tau)


def random_state(prob, sigma=5.0, mu=0.2, seed=1):
    rng = np.random.default_rng(seed)
    s = SolverState.zeros(prob, sigma, mu)
    s.w = 0.3 * rng.standard_normal(prob.P)
    s.z = 0.3 * rng.standard_normal(prob.n)
    s.psi = 0.2 * rng.uniform(-1, 1, prob.n)
    s.r = prob.X @ s.w
    return s


# ---------------------------------------------------------------- schedules

def test_schedules():
    cfg = SolverConfig(MCP, c=0.5, sigma0=0.5)
    assert sigma_schedule(0, cfg) == 0.5
    assert sigma_schedule(3, SolverConfig(MCP, c=0.5, sigma0=1.0)) == 1.0
    assert sigma_schedule(5, SolverConfig(MCP, sigma0=1.0, burn_in=10)) == 1.0
    assert sigma_schedule(99, SolverConfig(MCP)) == pytest.approx(5.0)
    assert mu_schedule(0.5, cfg) == pytest.approx(3.4641016151377544)
    assert mu_schedule(math.sqrt(3), cfg) == pytest.approx(1.0)
    mus = [mu_schedule(sigma_schedule(k, cfg), cfg) for k in range(0, 10000, 100)]
    assert all(a >= b for a, b in zip(mus, mus[1:])) and mus[-1] > 0


def test_config_validation():
    with pytest.raises(InvalidConfig):
        SolverConfig(MCP, beta=1.0).validate()
    SolverConfig(MCP, beta=1.0).validate(enforce_beta=False)
    for bad in (dict(c=0.0), dict(sigma0=-1.0), dict(max_iters=0), dict(eps1=math.nan)):
        with pytest.raises(InvalidConfig):
            SolverConfig(MCP, **bad).validate()


def test_problem_validation():
    X = np.ones((3, 2))
    with pytest.raises(InvalidConfig):
        ProblemInstance(X, np.ones(4), 0.5)
    with pytest.raises(InvalidConfig):
        ProblemInstance(X, np.ones(3), 1.0)
    with pytest.raises(InvalidConfig):
        ProblemInstance(np.array([[1.0, 0.0], [2.0, 0.0]]), np.ones(2), 0.5)
    with pytest.raises(InvalidConfig):
        ProblemInstance(np.array([[1.0, np.nan]]), np.ones(1), 0.5)


# ---------------------------------------------------------------- w block

def test_w_target_examples():
    prob = random_problem(6, 3)
    s = random_state(prob)
    s.psi[:] = 0.0
    s.z = prob.y - s.r
    for p in range(3):
        assert w_coordinate_target(s, prob, p) == pytest.approx(s.w[p], abs=1e-14)

    X = np.zeros((4, 1))
    X[0, 0] = 1.0
    prob = ProblemInstance(X, np.array([1.0, 0, 0, 0]), 0.5)
    s = SolverState.zeros(prob, 1.0, 0.1)
    assert w_coordinate_target(s, prob, 0) == 1.0


def _w_block_objective(state, prob, pen, p):
    def f(x):
        w = state.w.copy()
        w[p] = x
        return diag.smoothed_lagrangian(w, state.z, state.psi, state.sigma, state.mu, prob, pen)
    return f


@pytest.mark.parametrize("pen", [MCP, SCAD])
def test_w_target_centres_smooth_part(pen):
    # without the penalty the block objective is a parabola centred at a_p
    prob = random_problem(5, 3, seed=3)
    s = random_state(prob, sigma=5.0)
    for p in range(3):
        f = _w_block_objective(s, prob, pen, p)
        smooth = lambda x: f(x) - prob.n * penalty_eval(x, pen)  # noqa: E731
        a = w_coordinate_target(s, prob, p)
        for d in (0.05, 0.5):
            assert smooth(a + d) == pytest.approx(smooth(a - d), rel=1e-11)
            assert smooth(a) < smooth(a + d)


@pytest.mark.parametrize("pen,sigma", [(MCP, 5.0), (SCAD, 5.0), (MCP, 0.2)])
def test_w_sweep_matches_sequential_brute_force(pen, sigma):
    prob = random_problem(10, 4, seed=7)
    s = random_state(prob, sigma=sigma)
    ref = s.copy()
    cfg = SolverConfig(pen)
    w_sweep(s, prob, cfg)
    for p in range(prob.P):
        f = _w_block_objective(ref, prob, pen, p)
        x = brute_min(f, -4, 4)
        assert f(s.w[p]) <= f(x) + 1e-9 * (1 + abs(f(x)))
        if sigma > 1:
            assert s.w[p] == pytest.approx(x, abs=1e-6)
        ref.w[p] = s.w[p]
        ref.r = prob.X @ ref.w
    assert np.allclose(s.r, prob.X @ s.w, atol=1e-12)


def test_w_sweep_fixed_point_on_zero_data():
    prob = ProblemInstance(np.random.default_rng(0).standard_normal((5, 3)), np.zeros(5), 0.5)
    s = SolverState.zeros(prob, 1.0, 0.5)
    assert w_sweep(s, prob, SolverConfig(MCP)) == 0.0
    assert np.all(s.w == 0)


def test_w_sweep_large_sigma_approaches_target():
    X = np.zeros((3, 1))
    X[:, 0] = [1.0, 0.0, 0.0]
    prob = ProblemInstance(X, np.array([0.7, 0, 0]), 0.5)
    s = SolverState.zeros(prob, 1e8, 1e-8)
    w_sweep(s, prob, SolverConfig(MCP))
    assert s.w[0] == pytest.approx(0.7, abs=1e-6)


# ---------------------------------------------------------------- z block and dual

def test_z_update_examples():
    prob = random_problem(4, 2, tau=0.5)
    s = SolverState.zeros(prob, 1.0, 0.1)
    s.w = np.linalg.lstsq(prob.X, prob.y, rcond=None)[0]
    prob = ProblemInstance(prob.X, prob.X @ s.w, 0.5)
    s.r = prob.X @ s.w
    z_update(s, prob)
    assert np.allclose(s.z, 0.0, atol=1e-12)

    prob = ProblemInstance(np.array([[1.0]]), np.array([1.0]), 0.7)
    s = SolverState.zeros(prob, 1.0, 0.1)
    z_update(s, prob)
    assert s.z[0] == pytest.approx(0.3)
    s = SolverState.zeros(prob, 1.0, 0.1)
    z_update(s, prob, exact=True)
    assert s.z[0] == pytest.approx(0.3)


def test_z_update_matches_componentwise_brute_force():
    prob = random_problem(6, 3, seed=11)
    s = random_state(prob, sigma=2.0, mu=0.3)
    ref = s.copy()
    z_update(s, prob)
    lin = 2 * prob.tau - 1
    for i in range(prob.n):
        f = lambda v: (0.5 * (smoothed_abs(v, ref.mu) + lin * v) + ref.psi[i] * v  # noqa: E731
                       + 0.5 * ref.sigma * (v + ref.r[i] - prob.y[i]) ** 2)
        assert s.z[i] == pytest.approx(brute_min(f, -5, 5), abs=1e-6)


def test_dual_update_examples():
    prob = ProblemInstance(np.array([[1.0]]), np.array([0.0]), 0.5)
    s = SolverState.zeros(prob, 2.0, 0.1)
    s.z = np.array([0.1])
    assert dual_update(s, prob) == pytest.approx(0.04)
    assert s.psi[0] == pytest.approx(0.2)
    s = SolverState.zeros(prob, 2.0, 0.1)
    assert dual_update(s, prob) == 0.0 and s.psi[0] == 0.0


# ---------------------------------------------------------------- stopping

def test_stopping_check():
    prob = random_problem(8, 3)
    cfg = SolverConfig(MCP, eps1=1e-3, eps2=1e-3)
    s = random_state(prob)
    s.z = prob.y - s.r
    assert stopping_check(s.copy(), s, prob, cfg)

    bad = s.copy()
    res = np.ones(prob.n) / math.sqrt(prob.n) * 10 * math.sqrt(prob.n) * cfg.eps1
    bad.z = prob.y - bad.r + res
    tiny = SolverConfig(MCP, eps1=1e-3, eps2=1e-12)
    assert not stopping_check(bad.copy(), bad, prob, tiny)


def test_stopping_check_primal_boundary():
    # shrink z along y so ||z|| < ||y|| and the scale term is eps2 ||y||
    prob = random_problem(9, 2, seed=5)
    cfg = SolverConfig(MCP, eps1=1e-2, eps2=1e-3)
    ynorm = float(np.linalg.norm(prob.y))
    e = prob.y / ynorm
    bound = math.sqrt(prob.n) * cfg.eps1 + cfg.eps2 * ynorm
    s = SolverState.zeros(prob, 1.0, 1.0)
    s.z = prob.y - bound * (1 - 1e-12) * e
    assert stopping_check(s.copy(), s, prob, cfg)
    s.z = prob.y - 1.01 * bound * e
    assert not stopping_check(s.copy(), s, prob, cfg)


# ---------------------------------------------------------------- full runs

def test_zero_response_is_fixed_point():
    prob = ProblemInstance(np.random.default_rng(1).standard_normal((20, 30)), np.zeros(20), 0.7)
    res = solve(prob, SolverConfig(PenaltyParams("MCP", 5.0, 2.1), max_iters=50))
    assert res.termination is Termination.CONVERGED
    assert np.all(res.w == 0)
    assert np.max(np.abs(res.z)) < 1e-3


@pytest.fixture(scope="module")
def s1_run():
    trial = gen_trial(ScenarioConfig(seed=3))
    prob = ProblemInstance(trial.X, trial.y, trial.tau)
    states = []
    cfg = SolverConfig(MCP, max_iters=2000, trace_stride=1, check_stopping=False)
    res = solve(prob, cfg, trial.w_true, active_set=trial.active_set,
                callback=lambda s: states.append(s.copy()))
    return prob, cfg, res, states


def test_trace_layout(s1_run):
    _, cfg, res, _ = s1_run
    assert len(res.trace) == cfg.max_iters
    assert list(res.trace[0].__dataclass_fields__) == TRACE_COLUMNS
    assert [r.k for r in res.trace[:3]] == [1, 2, 3]
    assert math.isnan(res.trace[0].lemma7_slack)
    assert res.threshold_iter is not None


def test_run_invariants(s1_run):
    prob, cfg, res, states = s1_run
    bound = max(prob.tau, 1 - prob.tau) + 1e-8
    for st in states:
        assert np.max(np.abs(st.psi)) <= bound
        assert np.max(np.abs(st.psi + h_grad(st.z, st.mu, prob.tau))) <= 1e-8
        assert st.mu * st.sigma == pytest.approx(DEFAULT_BETA, rel=1e-15)
    slacks = np.array([r.lemma7_slack for r in res.trace[1:]])
    assert slacks.min() >= -1e-8
    assert np.allclose(states[-1].r, prob.X @ states[-1].w, atol=1e-10)


def test_lagrangian_lower_bound(s1_run):
    prob, _, res, states = s1_run
    for st, rec in zip(states, res.trace):
        res_norm = np.linalg.norm(st.z + st.r - prob.y)
        assert rec.smoothed_lagrangian >= -np.linalg.norm(st.psi) * res_norm - 1e-12
    # still descending, but decelerating towards a finite limit
    vals = np.array([r.smoothed_lagrangian for r in res.trace])
    dec = len(vals) // 10
    first_drop = vals[0] - vals[dec]
    last_drop = vals[-dec - 1] - vals[-1]
    assert np.all(np.isfinite(vals))
    assert 0 <= last_drop < 0.01 * first_drop


def test_descent_bound_past_threshold(s1_run):
    prob, _, res, states = s1_run
    checked = 0
    for prev, cur in zip(states[1:], states[2:]):
        chk = diag.descent_monitor(prev, cur, prob, MCP)
        if prev.k >= res.threshold_iter:
            assert chk.applicable
        if chk.applicable:
            checked += 1
            assert chk.holds, (prev.k, chk)
    assert checked > 1500


def test_solve_is_deterministic(s1_run):
    prob, cfg, res, _ = s1_run
    short = SolverConfig(MCP, max_iters=300, trace_stride=7, check_stopping=False)
    a = solve(prob, short)
    b = solve(prob, short)
    assert [r.as_row() for r in a.trace] == [r.as_row() for r in b.trace]
    assert np.array_equal(a.w, b.w)
    assert a.trace[-1].k == 300 and a.trace[0].k == 7
