"""Momentum-accelerated iterative hard thresholding (MIST).

Each iteration thresholds the gradient step taken at the extrapolated point
``w_k = x_k + alpha_k * delta_k``, ``delta_k = x_k - x_{k-1}``.  The step
size

    alpha_k = 2 eta * (gamma_k . p_k) / (gamma_k . delta_k)

uses ``gamma_k = (mu I - A^T A) delta_k``, obtained from cached products
``v_k = A^T A x_k`` as ``mu delta_k - (v_k - v_{k-1})``, so an iteration costs
one product with ``A`` and one with ``A^T``.  With ``mu > ||A||^2`` this
choice never increases the objective.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import ProblemInstance
from ..exceptions import DivergenceError, InvalidConfigError
from ..thresholding import ThresholdLevel, hard_threshold
from .run import SolverConfig, SolverRun, _Recorder, objective_from_residual

_GAMMA_NOISE = 64 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class IterateState:
    """``x_k``, ``x_{k-1}`` and the cached products ``u_k = A x_k``, ``v = A^T A x``."""

    x_curr: np.ndarray
    x_prev: np.ndarray
    v_curr: np.ndarray
    v_prev: np.ndarray
    u_curr: np.ndarray
    k: int = 0


def initial_state(prob: ProblemInstance, x0=None) -> IterateState:
    """State at ``k = 0`` with ``x_{-1} = x_0``."""
    x0 = np.zeros(prob.m) if x0 is None else np.array(prob.check_x(x0), dtype=np.float64)
    u0 = prob.matvec(x0)
    v0 = prob.rmatvec(u0)
    return IterateState(x_curr=x0, x_prev=x0, v_curr=v0, v_prev=v0, u_curr=u0, k=0)


def momentum_alpha(gamma, p, delta, eta: float) -> float:
    """Momentum step ``2 eta (gamma . p) / (gamma . delta)``.

    ``gamma`` must equal ``(mu I - A^T A) delta``; a non-positive
    denominator means ``mu`` does not dominate ``||A||^2``.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidConfigError(f"eta must lie in [0, 1], got {eta}")
    if not np.any(delta):
        raise ValueError("momentum step undefined for delta = 0")
    den = float(gamma @ delta)
    if not den > 0:
        raise InvalidConfigError(
            f"delta^T B delta = {den} <= 0: mu does not exceed ||A||^2")
    return 2.0 * eta * float(gamma @ p) / den


def mist_step(state: IterateState, prob: ProblemInstance, cfg: SolverConfig,
              mu: Optional[float] = None):
    """Advance one MIST iteration; returns ``(new_state, alpha_k)``."""
    if mu is None:
        mu = cfg.resolve_mu(prob)
    elif not mu > prob.spec_norm_sq:
        raise InvalidConfigError(f"mu={mu!r} does not exceed the spectral bound {prob.spec_norm_sq!r}")
    level = ThresholdLevel.from_penalty(cfg.lam, mu)
    x, v = state.x_curr, state.v_curr

    g = x - (v - prob.y_bar) / mu
    eta = cfg.eta_at(state.k)
    alpha = 0.0
    if state.k > 0 and eta > 0.0:
        delta = x - state.x_prev
        if np.any(delta):
            p = hard_threshold(g, x, level) - x
            gamma = mu * delta - (v - state.v_prev)
            # v_k - v_{k-1} carries rounding of order eps * ||v||; below that
            # level delta^T B delta is noise and the momentum step is skipped
            noise = _GAMMA_NOISE * (np.linalg.norm(v) + np.linalg.norm(state.v_prev)) * np.linalg.norm(delta)
            if float(gamma @ delta) > noise:
                alpha = momentum_alpha(gamma, p, delta, eta)
    if alpha == 0.0:
        x_new = hard_threshold(g, x, level)
    else:
        w = x + alpha * delta
        x_new = hard_threshold(g + (alpha / mu) * gamma, w, level)
    if not np.all(np.isfinite(x_new)):
        raise DivergenceError(f"mist: non-finite iterate at iteration {state.k + 1}", state.k + 1)

    u_new = prob.matvec(x_new)
    v_new = prob.rmatvec(u_new)
    return IterateState(x_curr=x_new, x_prev=x, v_curr=v_new, v_prev=v,
                        u_curr=u_new, k=state.k + 1), alpha


def mist_solve(prob: ProblemInstance, cfg: SolverConfig, x0=None) -> SolverRun:
    """Run MIST from ``x0`` (zeros by default) until the relative objective
    decrease drops below ``cfg.rel_tol`` or ``cfg.max_iters`` is reached."""
    mu = cfg.resolve_mu(prob)
    state = initial_state(prob, x0)
    f0 = objective_from_residual(prob, state.u_curr, state.x_curr, cfg.lam)
    rec = _Recorder("mist", cfg, mu, f0, state.x_curr, eta=cfg.eta)
    while True:
        state, alpha = mist_step(state, prob, cfg, mu)
        f = objective_from_residual(prob, state.u_curr, state.x_curr, cfg.lam)
        step = float(np.linalg.norm(state.x_curr - state.x_prev))
        if rec.record(state.x_curr, f, step, alpha):
            return rec.run
