import numpy as np
import pytest

from l0mist.core import ProblemInstance
from l0mist.solvers import SolverConfig, initial_state, mist_solve, mist_step

# Lines collected by tests/test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


class CountingProblem(ProblemInstance):
    """ProblemInstance that counts products with A and A^T."""

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "counts", {"A": 0, "AT": 0})

    def matvec(self, x):
        self.counts["A"] += 1
        return super().matvec(x)

    def rmatvec(self, u):
        self.counts["AT"] += 1
        return super().rmatvec(u)


def random_problem(rng, d, m, n_spikes=None, sigma=0.1):
    A = rng.standard_normal((d, m))
    x = np.zeros(m)
    k = max(1, m // 8) if n_spikes is None else n_spikes
    idx = rng.choice(m, size=k, replace=False)
    x[idx] = rng.choice([-1.0, 1.0], size=k)
    y = A @ x + sigma * rng.standard_normal(d)
    return ProblemInstance(A, y), x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gamma_errors(prob, lam):
    """Relative error of the solver's gamma against an extended-precision
    ``(mu I - A^T A) delta`` over every iteration of a MIST run."""
    cfg = SolverConfig(lam=lam)
    run = mist_solve(prob, cfg)
    mu = run.mu
    A = prob.A.astype(np.longdouble)
    B = np.longdouble(mu) * np.eye(prob.m, dtype=np.longdouble) - A.T @ A
    state = initial_state(prob)
    errs, bounds = [], []
    for _ in range(run.iterations):
        state, _ = mist_step(state, prob, cfg, mu)
        delta = state.x_curr - state.x_prev
        if not np.any(delta):
            continue
        gamma = mu * delta - (state.v_curr - state.v_prev)
        ref = B @ delta.astype(np.longdouble)
        errs.append(float(np.sqrt(np.sum((gamma - ref) ** 2) / np.sum(ref ** 2))))
        # first-order rounding bound for the cached-product difference
        bounds.append(float(np.finfo(float).eps * (np.linalg.norm(state.v_curr) + np.linalg.norm(state.v_prev))
                            / np.sqrt(np.sum(ref ** 2))))
    return np.array(errs), np.array(bounds)
