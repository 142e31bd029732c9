"""Choosing the penalty weight: EBIC, oracle MSE and grid sweeps."""
from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ProblemInstance, l0_norm
from .exceptions import DivergenceError, ZeroResidualError
from .solvers import SolverConfig, certify_fixed_point, get_solver

#: Relative grid bounds, in units of ``||A^T y||_inf``.
DEFAULT_GRID = (1e-4, 0.2, 20)


class Criterion(str, enum.Enum):
    EBIC = "ebic"
    MSE = "mse"


def default_gamma(d: int, m: int) -> float:
    """``gamma = 1 - 1 / (2 kappa)`` with ``m = d ** kappa``."""
    if d < 2 or m < 2:
        raise ValueError(f"kappa = log m / log d needs d, m >= 2, got {d}, {m}")
    kappa = math.log(m) / math.log(d)
    return 1.0 - 1.0 / (2.0 * kappa)


def ebic(prob: ProblemInstance, x_hat, gamma: Optional[float] = None) -> float:
    """Extended BIC of the fit ``x_hat``.

    ``log(RSS / d) + (log d / d + 2 gamma log m / d) * ||x_hat||_0``;
    ``gamma = 0`` gives the classical BIC and ``None`` selects
    :func:`default_gamma`.
    """
    d, m = prob.d, prob.m
    if gamma is None:
        gamma = default_gamma(d, m)
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    x_hat = prob.check_x(x_hat)
    r = prob.y - prob.matvec(x_hat)
    rss = float(r @ r)
    if rss == 0.0:
        raise ZeroResidualError("EBIC undefined for a zero residual")
    return math.log(rss / d) + (math.log(d) / d + 2.0 * gamma * math.log(m) / d) * l0_norm(x_hat)


def mse(x_true, x_hat) -> float:
    """``||x_true - x_hat||^2 / ||x_true||^2``."""
    x_true = np.asarray(x_true, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x_true.shape != x_hat.shape:
        raise ValueError(f"length mismatch: {x_true.shape} vs {x_hat.shape}")
    denom = float(x_true @ x_true)
    if denom == 0.0:
        raise ValueError("MSE undefined for a zero true signal")
    diff = x_true - x_hat
    return float(diff @ diff) / denom


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple
    scale_anchor: Optional[float] = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("empty lambda grid")
        if any(not v > 0 for v in vals):
            raise ValueError("lambda values must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def lambda_grid_relative(prob: ProblemInstance, lo_frac: float, hi_frac: float, n: int,
                         log_spaced: bool = False) -> LambdaGrid:
    """``n`` values between ``lo_frac`` and ``hi_frac`` times ``||A^T y||_inf``
    (equally spaced unless ``log_spaced``)."""
    if not 0 < lo_frac < hi_frac:
        raise ValueError(f"need 0 < lo_frac < hi_frac, got {lo_frac}, {hi_frac}")
    if n < 2:
        raise ValueError(f"grid needs n >= 2 points, got {n}")
    anchor = float(np.max(np.abs(prob.y_bar)))
    if anchor == 0.0:
        raise ValueError("A^T y = 0: relative grid has no scale")
    if log_spaced:
        vals = np.geomspace(lo_frac * anchor, hi_frac * anchor, n)
    else:
        vals = np.linspace(lo_frac * anchor, hi_frac * anchor, n)
    return LambdaGrid(tuple(vals), scale_anchor=anchor)


@dataclass
class SelectionResult:
    """Per-grid-point runs and criterion values; infeasible points hold ``nan``."""

    criterion: Criterion
    lambdas: tuple
    criterion_values: list
    runs: list
    feasible: list
    certified: list = field(default_factory=list)
    #: reason a point was left out of the selection ("" when it was not)
    excluded: list = field(default_factory=list)
    lambda_best: Optional[float] = None
    index_best: Optional[int] = None

    def rows(self):
        for i, lam in enumerate(self.lambdas):
            run = self.runs[i]
            yield {
                "lambda": lam,
                "criterion": self.criterion_values[i],
                "feasible": self.feasible[i],
                "excluded": self.excluded[i] if self.excluded else "",
                "iterations": run.iterations if run is not None else None,
                "final_F": run.final_objective if run is not None else None,
                "wall_time": run.wall_times[-1] if run is not None and run.wall_times else None,
                "termination": run.termination.value if run is not None else "Diverged",
                "certified": self.certified[i] if self.certified else None,
            }

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "lambda_best": self.lambda_best,
            "index_best": self.index_best,
            "points": [
                {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
                for row in self.rows()
            ],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    def write_csv(self, path) -> None:
        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


def saturated(prob: ProblemInstance, x_hat) -> bool:
    """True when ``x_hat`` has at least ``d`` nonzeros.

    A fixed point on such a support fits the data exactly in the limit, so
    its finite-precision RSS only reflects where the iteration stopped.
    """
    return l0_norm(x_hat) >= prob.d


def evaluate_criterion(criterion, prob: ProblemInstance, x_hat, x_true=None, gamma=None) -> float:
    criterion = Criterion(criterion)
    if criterion is Criterion.EBIC:
        return ebic(prob, x_hat, gamma)
    return mse(x_true, x_hat)


def sweep(prob: ProblemInstance, grid: Sequence[float], solver, cfg_template: SolverConfig,
          criterion="ebic", x_true=None, gamma: Optional[float] = None, jobs: int = 1,
          cert_tol: float = 1e-6) -> SelectionResult:
    """Solve from ``x0 = 0`` at every grid value and pick the criterion minimiser.

    ``solver`` is a solver name or callable.  Ties go to the smaller
    ``lambda``.  Grid points are left out of the selection (and flagged in
    ``excluded``) when the run diverges, when the residual is exactly zero,
    or, for EBIC, when the fit is :func:`saturated`.  Runs are
    distributed over ``jobs`` threads; results keep grid order.
    """
    criterion = Criterion(criterion)
    if criterion is Criterion.MSE and x_true is None:
        raise ValueError("MSE selection requires x_true")
    solve: Callable = get_solver(solver) if isinstance(solver, str) else solver
    lambdas = tuple(sorted(grid))

    def one(lam):
        cfg = cfg_template.with_lam(lam)
        try:
            run = solve(prob, cfg)
        except DivergenceError:
            return None, math.nan, False, "diverged"
        cert = certify_fixed_point(prob, lam, run.mu, run.x_final, cert_tol).certified
        if criterion is Criterion.EBIC and saturated(prob, run.x_final):
            return run, math.nan, cert, "saturated"
        try:
            value = evaluate_criterion(criterion, prob, run.x_final, x_true, gamma)
        except ZeroResidualError:
            return run, math.nan, cert, "zero_residual"
        return run, value, cert, ""

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, lambdas))
    else:
        results = [one(lam) for lam in lambdas]

    runs = [r[0] for r in results]
    values = [r[1] for r in results]
    feasible = [not r[3] for r in results]
    res = SelectionResult(criterion=criterion, lambdas=lambdas, criterion_values=values,
                          runs=runs, feasible=feasible, certified=[r[2] for r in results],
                          excluded=[r[3] for r in results])
    if not any(feasible):
        raise DivergenceError("no grid point yielded a usable fit")
    masked = np.where(feasible, values, np.inf)
    best = int(np.argmin(masked))  # first minimum, i.e. smallest lambda on ties
    res.index_best = best
    res.lambda_best = lambdas[best]
    return res
