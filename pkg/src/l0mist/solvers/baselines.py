"""Comparison solvers: IHT and hard-thresholding variants of FISTA / M-FISTA.

All three reuse the gradient step and hard-thresholding map of MIST and
the same stopping rule.  Products with ``A`` at extrapolated points are
formed from cached products at the iterates, so every solver issues two
matrix-vector products per iteration.
"""
from __future__ import annotations

import math

import numpy as np

from ..core import ProblemInstance
from ..exceptions import DivergenceError
from ..thresholding import ThresholdLevel, hard_threshold
from .run import SolverConfig, SolverRun, _Recorder, objective_from_residual


def _start(prob: ProblemInstance, x0):
    x = np.zeros(prob.m) if x0 is None else np.array(prob.check_x(x0), dtype=np.float64)
    return x, prob.matvec(x)


def next_t(t: float) -> float:
    """Nesterov sequence ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def iht_solve(prob: ProblemInstance, cfg: SolverConfig, x0=None) -> SolverRun:
    """Iterative hard thresholding, ``x_{k+1} = H(g(x_k))`` with tie reference ``x_k``."""
    mu = cfg.resolve_mu(prob)
    level = ThresholdLevel.from_penalty(cfg.lam, mu)
    x, u = _start(prob, x0)
    rec = _Recorder("iht", cfg, mu, objective_from_residual(prob, u, x, cfg.lam), x, eta=0.0)
    while True:
        v = prob.rmatvec(u)
        g = x - (v - prob.y_bar) / mu
        x_new = hard_threshold(g, x, level)
        u = prob.matvec(x_new)
        f = objective_from_residual(prob, u, x_new, cfg.lam)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if rec.record(x, f, step, 0.0):
            return rec.run


def fista_hard_solve(prob: ProblemInstance, cfg: SolverConfig, x0=None) -> SolverRun:
    """FISTA with the hard-thresholding map.

    ``w_k = x_k + ((t_k - 1) / t_{k+1}) (x_k - x_{k-1})`` with ``t_0 = 1``;
    the objective is not guaranteed to decrease.
    """
    mu = cfg.resolve_mu(prob)
    level = ThresholdLevel.from_penalty(cfg.lam, mu)
    x, u = _start(prob, x0)
    x_prev, u_prev = x, u
    t = 1.0
    rec = _Recorder("fista", cfg, mu, objective_from_residual(prob, u, x, cfg.lam), x)
    while True:
        t_next = next_t(t)
        beta = (t - 1.0) / t_next
        w = x + beta * (x - x_prev)
        Aw = u + beta * (u - u_prev)
        g = w - (prob.rmatvec(Aw) - prob.y_bar) / mu
        x_new = hard_threshold(g, w, level)
        u_new = prob.matvec(x_new)
        f = objective_from_residual(prob, u_new, x_new, cfg.lam)
        step = float(np.linalg.norm(x_new - x))
        x_prev, u_prev, x, u, t = x, u, x_new, u_new, t_next
        if rec.record(x, f, step, beta):
            return rec.run


def mfista_hard_solve(prob: ProblemInstance, cfg: SolverConfig, x0=None) -> SolverRun:
    """Monotone FISTA with the hard-thresholding map.

    The candidate ``z_{k+1} = H(w_k - grad f(w_k) / mu)`` is accepted only if
    it does not increase ``F``.  The next extrapolated point combines the
    accepted iterate and the candidate,

        w_{k+1} = x_{k+1} + (t_{k+1}/t_{k+2}) (z_{k+1} - x_{k+1})
                          + ((t_{k+1} - 1)/t_{k+2}) (x_{k+1} - x_k),

    and ``t`` keeps advancing on rejections.  Stopping compares the
    candidate's objective with ``F(x_k)``, so a rejected step does not count
    as stagnation.
    """
    mu = cfg.resolve_mu(prob)
    level = ThresholdLevel.from_penalty(cfg.lam, mu)
    x, u = _start(prob, x0)
    f_x = objective_from_residual(prob, u, x, cfg.lam)
    w, Aw = x, u
    t = 1.0
    beta = 0.0
    rec = _Recorder("mfista", cfg, mu, f_x, x)
    while True:
        g = w - (prob.rmatvec(Aw) - prob.y_bar) / mu
        z = hard_threshold(g, w, level)
        Az = prob.matvec(z)
        f_z = objective_from_residual(prob, Az, z, cfg.lam)
        if not np.isfinite(f_z):
            raise DivergenceError(f"mfista: non-finite candidate at iteration {rec.run.iterations + 1}",
                                  rec.run.iterations + 1)
        if f_z <= f_x:
            x_new, u_new, f_new = z, Az, f_z
        else:
            x_new, u_new, f_new = x, u, f_x
        t_next = next_t(t)
        t_after = next_t(t_next)
        c_z = t_next / t_after
        c_m = (t_next - 1.0) / t_after
        step = float(np.linalg.norm(x_new - x))
        change = abs(f_z - f_x)
        w = x_new + c_z * (z - x_new) + c_m * (x_new - x)
        Aw = u_new + c_z * (Az - u_new) + c_m * (u_new - u)
        alpha_used = beta
        x, u, f_x, t, beta = x_new, u_new, f_new, t_next, c_m
        if rec.record(x, f_x, step, alpha_used, change=change):
            return rec.run
