import math

import numpy as np
import pytest

from conftest import CountingProblem, gamma_errors, random_problem
from l0mist.core import ProblemInstance, grad_f
from l0mist.datagen import ExperimentSpec, make_instance
from l0mist.exceptions import DivergenceError, InvalidConfigError
from l0mist.solvers import (
    FixedPointReport, SolverConfig, SolverRun, Termination, certify_fixed_point, fista_hard_solve,
    get_solver, iht_solve, initial_state, mfista_hard_solve, mist_solve, mist_step, momentum_alpha, next_t,
)
from l0mist.thresholding import prox_step

ALL = [mist_solve, iht_solve, fista_hard_solve, mfista_hard_solve]


# -- momentum step ---------------------------------------------------------

def test_alpha_p_equals_delta():
    g = np.array([2.0, 1.0])
    d = np.array([0.5, -1.0])
    assert momentum_alpha(g + 3 * d, d, d, 0.5) == pytest.approx(1.0)


def test_alpha_orthogonal_p():
    assert momentum_alpha(np.array([1.0, 0.0]), np.array([0.0, 5.0]), np.array([1.0, 1.0]), 0.9) == 0.0


def test_alpha_diag_example():
    A = np.diag([1.0, 2.0])
    mu = 5.0
    B = mu * np.eye(2) - A.T @ A
    delta = np.array([1.0, 1.0])
    assert momentum_alpha(B @ delta, np.array([2.0, 0.0]), delta, 1.0) == pytest.approx(3.2, rel=1e-15)


def test_alpha_errors():
    with pytest.raises(ValueError):
        momentum_alpha(np.ones(2), np.ones(2), np.zeros(2), 0.5)
    with pytest.raises(InvalidConfigError):
        momentum_alpha(-np.ones(2), np.ones(2), np.ones(2), 0.5)
    with pytest.raises(InvalidConfigError):
        momentum_alpha(np.ones(2), np.ones(2), np.ones(2), 1.5)


# -- single steps ----------------------------------------------------------

def test_first_step_is_iht_step(rng):
    prob, _ = random_problem(rng, 10, 20)
    cfg = SolverConfig(lam=0.05 * np.max(np.abs(prob.y_bar)))
    mu = cfg.resolve_mu(prob)
    state, alpha = mist_step(initial_state(prob), prob, cfg)
    assert alpha == 0.0
    np.testing.assert_array_equal(state.x_curr, prox_step(prob, mu, cfg.lam, np.zeros(20)))


def test_zero_delta_gives_plain_prox(rng):
    prob, _ = random_problem(rng, 10, 20)
    cfg = SolverConfig(lam=0.05 * np.max(np.abs(prob.y_bar)))
    mu = cfg.resolve_mu(prob)
    x = rng.standard_normal(20)
    st = initial_state(prob, x)
    st = type(st)(x_curr=st.x_curr, x_prev=st.x_prev, v_curr=st.v_curr, v_prev=st.v_prev,
                  u_curr=st.u_curr, k=3)
    new, alpha = mist_step(st, prob, cfg)
    assert alpha == 0.0
    np.testing.assert_array_equal(new.x_curr, prox_step(prob, mu, cfg.lam, x))


def test_explicit_mu_must_exceed_bound(rng):
    prob, _ = random_problem(rng, 5, 8)
    with pytest.raises(InvalidConfigError):
        mist_step(initial_state(prob), prob, SolverConfig(lam=1.0), mu=prob.spec_norm_sq)


def _reference_mist(A, y, lam, mu, eta, steps):
    """Step-by-step transliteration of the algorithm with scalar loops."""
    d, m = len(A), len(A[0])
    ybar = [sum(A[j][i] * y[j] for j in range(d)) for i in range(m)]
    cut = math.sqrt(2 * lam / mu)

    def thr(vec, ref):
        out = []
        for a, r in zip(vec, ref):
            keep = abs(a) > cut or (abs(a) == cut and r != 0)
            out.append(a if keep else 0.0)
        return out

    def ata(x):
        u = [sum(A[j][i] * x[i] for i in range(m)) for j in range(d)]
        return [sum(A[j][i] * u[j] for j in range(d)) for i in range(m)]

    x_prev = x = [0.0] * m
    v_prev = v = ata(x)
    out = []
    for k in range(steps):
        g = [x[i] - (v[i] - ybar[i]) / mu for i in range(m)]
        p = [a - b for a, b in zip(thr(g, x), x)]
        delta = [a - b for a, b in zip(x, x_prev)]
        gamma = [mu * delta[i] - v[i] + v_prev[i] for i in range(m)]
        if k == 0 or not any(delta):
            alpha = 0.0
        else:
            alpha = 2 * eta * sum(a * b for a, b in zip(gamma, p)) / sum(a * b for a, b in zip(gamma, delta))
        w = [x[i] + alpha * delta[i] for i in range(m)]
        x_new = thr([g[i] + alpha / mu * gamma[i] for i in range(m)], w)
        x_prev, x = x, x_new
        v_prev, v = v, ata(x)
        out.append((np.array(x), alpha))
    return out


def test_transliterated_reference_cross_check():
    rng = np.random.default_rng(812)
    prob, _ = random_problem(rng, 8, 12, n_spikes=3)
    lam = 0.02 * float(np.max(np.abs(prob.y_bar)))
    cfg = SolverConfig(lam=lam, eta=0.9)
    mu = cfg.resolve_mu(prob)
    ref = _reference_mist(prob.A.tolist(), prob.y.tolist(), lam, mu, 0.9, 5)
    state = initial_state(prob)
    for k, (x_ref, a_ref) in enumerate(ref):
        state, alpha = mist_step(state, prob, cfg, mu)
        assert alpha == pytest.approx(a_ref, rel=1e-9, abs=1e-12)
        assert np.array_equal(state.x_curr != 0, x_ref != 0)
        np.testing.assert_allclose(state.x_curr, x_ref, rtol=1e-10, atol=1e-12)
    assert any(a != 0 for _, a in ref)


def test_gamma_identity_compressed_regime():
    # d <= m, the sensing regime: every iteration within 1e-10
    rng = np.random.default_rng(71)
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(8, 65))
        d = int(rng.integers(4, m + 1))
        prob, _ = random_problem(rng, d, m, sigma=0.3)
        errs, _ = gamma_errors(prob, 0.02 * float(np.max(np.abs(prob.y_bar))))
        worst = max(worst, errs.max())
    assert worst < 1e-10


def test_gamma_identity_within_rounding_bound():
    rng = np.random.default_rng(72)
    for _ in range(20):
        prob, _ = random_problem(rng, int(rng.integers(4, 65)), int(rng.integers(4, 65)), sigma=0.3)
        errs, bounds = gamma_errors(prob, 0.02 * float(np.max(np.abs(prob.y_bar))))
        assert np.all(errs <= 8 * bounds)


def test_alpha_well_posed_along_runs(rng):
    for _ in range(10):
        prob, _ = random_problem(rng, 30, 60)
        cfg = SolverConfig(lam=0.03 * np.max(np.abs(prob.y_bar)))
        mu = cfg.resolve_mu(prob)
        state = initial_state(prob)
        for _ in range(100):
            state, _ = mist_step(state, prob, cfg, mu)
            delta = state.x_curr - state.x_prev
            if np.any(delta) and np.linalg.norm(delta) > 1e-8:
                gamma = mu * delta - (state.v_curr - state.v_prev)
                assert gamma @ delta > 0


# -- full runs -------------------------------------------------------------

def test_zero_data_terminates_immediately():
    prob = ProblemInstance(np.random.default_rng(0).standard_normal((5, 7)), np.zeros(5))
    for solve in ALL:
        run = solve(prob, SolverConfig(lam=1.0))
        assert run.iterations == 1
        assert run.final_objective == 0.0
        assert not np.any(run.x_final)
        assert run.termination is Termination.REL_TOL_MET


@pytest.mark.parametrize("solve", ALL)
def test_orthogonal_example(solve):
    prob = ProblemInstance(np.eye(4), [3.0, 0.1, -2.0, 0.0], spec_norm_sq=1.0)
    cfg = SolverConfig(lam=1.0, mu=1.0 + 1e-15)
    run = solve(prob, cfg)
    # extrapolated solvers may land one rounding error away
    assert np.array_equal(run.x_final != 0, [True, False, True, False])
    np.testing.assert_allclose(run.x_final, [3.0, 0.0, -2.0, 0.0], rtol=1e-14)
    rep = certify_fixed_point(prob, 1.0, run.mu, run.x_final, 1e-6)
    assert rep.certified
    assert rep.c2_residual < 1e-14
    assert rep.c3_margin == pytest.approx(2.0 - math.sqrt(2.0 / run.mu), rel=1e-15)
    assert rep.support_set == (0, 2)


def test_product_counts():
    rng = np.random.default_rng(9)
    A = rng.standard_normal((20, 40))
    y = rng.standard_normal(20)
    for solve in ALL:
        prob = CountingProblem(A, y)
        run = solve(prob, SolverConfig(lam=0.5, max_iters=50))
        k = run.iterations
        # one product of each kind per iteration, plus the start-up products
        assert prob.counts["A"] == k + 1
        assert prob.counts["AT"] == k + (1 if solve is mist_solve else 0)


@pytest.mark.parametrize("solve", [mist_solve, iht_solve, mfista_hard_solve])
def test_monotone_solvers(solve):
    rng = np.random.default_rng(31)
    for _ in range(100):
        prob, _ = random_problem(rng, int(rng.integers(5, 60)), int(rng.integers(10, 120)), sigma=0.5)
        lam = float(rng.uniform(0.005, 0.2)) * np.max(np.abs(prob.y_bar))
        run = solve(prob, SolverConfig(lam=lam, max_iters=3000))
        f = np.concatenate([[run.initial_objective], run.objective_trace])
        assert np.all(f[1:] <= f[:-1] + 1e-10 * (1 + f[:-1]))


def test_mfista_matches_fista_until_first_rise():
    # the accept test only intervenes once FISTA would increase F
    rng = np.random.default_rng(5)
    for _ in range(20):
        prob, _ = random_problem(rng, 30, 50, sigma=0.2)
        cfg = SolverConfig(lam=0.1 * np.max(np.abs(prob.y_bar)), max_iters=500, record_trace=True)
        a = fista_hard_solve(prob, cfg)
        b = mfista_hard_solve(prob, cfg)
        f = np.concatenate([[a.initial_objective], a.objective_trace])
        rises = np.flatnonzero(np.diff(f) > 0)
        k = int(rises[0]) if rises.size else a.iterations
        assert a.objective_trace[:k] == b.objective_trace[:k]
        for xa, xb in zip(a.x_trace[:k + 1], b.x_trace[:k + 1]):
            np.testing.assert_array_equal(xa, xb)


def test_fista_can_increase_objective():
    rng = np.random.default_rng(6)
    rises = 0
    for _ in range(30):
        prob, _ = random_problem(rng, 40, 80, sigma=0.5)
        run = fista_hard_solve(prob, SolverConfig(lam=0.01 * np.max(np.abs(prob.y_bar)), max_iters=2000))
        rises += int(np.any(np.diff(run.objective_trace) > 0))
    assert rises > 0


def test_t_sequence():
    t1 = next_t(1.0)
    t2 = next_t(t1)
    assert t1 == pytest.approx((1 + math.sqrt(5)) / 2)
    assert round(t1, 4) == 1.618
    assert round(t2, 4) == 2.1935


def test_fista_first_step_is_iht_step(rng):
    prob, _ = random_problem(rng, 15, 30)
    cfg = SolverConfig(lam=0.05 * np.max(np.abs(prob.y_bar)), max_iters=1)
    np.testing.assert_array_equal(fista_hard_solve(prob, cfg).x_final, iht_solve(prob, cfg).x_final)
    np.testing.assert_array_equal(mfista_hard_solve(prob, cfg).x_final, iht_solve(prob, cfg).x_final)


def test_max_iters_and_traces(rng):
    prob, _ = random_problem(rng, 30, 60)
    for solve in ALL:
        run = solve(prob, SolverConfig(lam=0.01 * np.max(np.abs(prob.y_bar)), max_iters=3))
        assert run.termination is Termination.MAX_ITERS
        assert run.iterations == 3
        assert len(run.step_norm_trace) == len(run.alpha_trace) == len(run.wall_times) == 3
        assert np.all(np.diff(run.wall_times) >= 0)


def test_divergence_detected():
    A = np.eye(3)
    prob = ProblemInstance(A, np.array([1e200, 1e200, 1e200]), spec_norm_sq=1.0)
    with pytest.raises(DivergenceError):
        mist_solve(prob, SolverConfig(lam=1.0))


def test_iterating_past_stop_rule_does_not_fail(rng):
    # steps at the rounding level of the cached products must not break the momentum step
    prob, _ = random_problem(rng, 41, 8, sigma=0.3)
    run = mist_solve(prob, SolverConfig(lam=0.02 * np.max(np.abs(prob.y_bar)), rel_tol=1e-300, max_iters=400))
    assert run.iterations >= 1


def test_config_validation(rng):
    prob, _ = random_problem(rng, 4, 6)
    with pytest.raises(InvalidConfigError):
        SolverConfig(lam=0.0)
    with pytest.raises(InvalidConfigError):
        SolverConfig(lam=1.0, eta=1.0)
    with pytest.raises(InvalidConfigError):
        SolverConfig(lam=1.0, rel_tol=0.0)
    with pytest.raises(InvalidConfigError):
        SolverConfig(lam=1.0, mu=prob.spec_norm_sq).resolve_mu(prob)
    mu = SolverConfig(lam=1.0).resolve_mu(prob)
    assert mu > prob.spec_norm_sq >= np.linalg.norm(prob.A, 2) ** 2
    with pytest.raises(ValueError):
        get_solver("ista")


def test_run_serialization(tmp_path, rng):
    prob, _ = random_problem(rng, 10, 20)
    run = mist_solve(prob, SolverConfig(lam=0.05 * np.max(np.abs(prob.y_bar)), record_trace=True))
    run.write_json(tmp_path / "run.json")
    back = SolverRun.read_json(tmp_path / "run.json")
    assert back.objective_trace == run.objective_trace
    assert back.termination is run.termination
    np.testing.assert_array_equal(back.x_final, run.x_final)
    assert len(back.x_trace) == run.iterations + 1
    run.write_csv(tmp_path / "trace.csv")
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "k,F,step_norm,alpha,wall_time"
    assert len(lines) == run.iterations + 1
    assert float(lines[-1].split(",")[1]) == run.final_objective


def test_relative_error_and_first_reach():
    run = SolverRun(solver="x", lam=1.0, mu=2.0, x_final=np.zeros(1), initial_objective=10.0,
                    objective_trace=[4.0, 2.2, 2.0], wall_times=[0.1, 0.2, 0.3])
    np.testing.assert_allclose(run.relative_error(), [1.0, 0.1, 0.0])
    assert run.first_reach(0.15) == (2, 0.2)
    assert run.first_reach(1e-10) == (3, 0.3)


# -- certificate -----------------------------------------------------------

def test_certify_zero_below_threshold(rng):
    prob, _ = random_problem(rng, 6, 10)
    mu = prob.spec_norm_sq * 1.01
    lam = np.max(np.abs(prob.y_bar)) ** 2 / (2 * mu)
    rep = certify_fixed_point(prob, lam, mu, np.zeros(10), 1e-9)
    assert rep.certified and rep.support_set == () and rep.c2_residual == 0.0
    assert rep.c3_margin == math.inf


def test_certify_zero_above_threshold(rng):
    prob, _ = random_problem(rng, 6, 10)
    mu = prob.spec_norm_sq * 1.01
    lam = 0.5 * np.max(np.abs(prob.y_bar)) ** 2 / (2 * mu)
    rep = certify_fixed_point(prob, lam, mu, np.zeros(10), 1e-9)
    assert not rep.certified and rep.c1_margin < 0


def test_report_roundtrip(tmp_path, rng):
    prob, _ = random_problem(rng, 6, 10)
    rep = certify_fixed_point(prob, 1.0, prob.spec_norm_sq * 2, np.zeros(10), 1e-6)
    rep.write_json(tmp_path / "fp.json")
    import json
    back = FixedPointReport.from_dict(json.loads((tmp_path / "fp.json").read_text()))
    assert back == rep
    with pytest.raises(ValueError):
        certify_fixed_point(prob, 1.0, 2.0, np.zeros(10), 0.0)


def _desk_runs(n=3):
    spec = ExperimentSpec.preset("desk", sigma=3.0, seed=606)
    for i in range(n):
        prob = make_instance(spec, i).problem
        lam = 0.03 * float(np.max(np.abs(prob.y_bar)))
        cfg = SolverConfig(lam=lam, max_iters=20_000)
        yield prob, cfg, mist_solve(prob, cfg)


def test_desk_termination_c1_c3_hold():
    for prob, cfg, run in _desk_runs():
        assert run.termination is Termination.REL_TOL_MET
        rep = certify_fixed_point(prob, cfg.lam, run.mu, run.x_final, 1e-6)
        assert rep.c1_margin > 0 and rep.c3_margin > 0
        # the gradient on the support is small but not at 1e-6 (see ledger)
        assert rep.c2_residual < 0.1


def test_desk_terminal_point_is_certified_fixed_point():
    # continuing without momentum and without the objective-based stop
    # reaches the certificate on the same support
    for prob, cfg, run in _desk_runs():
        flat = SolverConfig(lam=cfg.lam, eta=0.0)
        state = initial_state(prob, run.x_final)
        for _ in range(300):
            state, _ = mist_step(state, prob, flat, run.mu)
        assert np.array_equal(state.x_curr != 0, run.x_final != 0)
        rep = certify_fixed_point(prob, cfg.lam, run.mu, state.x_curr, 1e-6)
        assert rep.certified and rep.c2_residual < 1e-9


def test_fixed_point_stability():
    for prob, cfg, run in _desk_runs(1):
        flat = SolverConfig(lam=cfg.lam, eta=0.0)
        state = initial_state(prob, run.x_final)
        for _ in range(300):
            state, _ = mist_step(state, prob, flat, run.mu)
        x = state.x_curr
        assert certify_fixed_point(prob, cfg.lam, run.mu, x, 1e-6).certified
        nxt, _ = mist_step(initial_state(prob, x), prob, cfg, run.mu)
        assert np.array_equal(nxt.x_curr != 0, x != 0)
        np.testing.assert_allclose(nxt.x_curr, x, rtol=1e-12, atol=0)
        g = np.abs(grad_f(prob, x))
        assert np.all(np.abs(x[x != 0]) >= math.sqrt(2 * cfg.lam / run.mu) - 1e-6)
        assert np.all(g[x == 0] <= math.sqrt(2 * cfg.lam * run.mu))
