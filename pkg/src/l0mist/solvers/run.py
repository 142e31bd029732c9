"""Solver configuration, per-run traces and their JSON/CSV forms."""
from __future__ import annotations

import csv
import enum
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..core import ProblemInstance, l0_norm
from ..exceptions import DivergenceError, InvalidConfigError

#: Iterations are stopped when ``|F_k - F_{k-1}| / F_k`` falls below this.
DEFAULT_REL_TOL = 1e-10
DEFAULT_ETA = 1.0 - 1e-15
#: Additive margin above the spectral bound, relative to that bound.
DEFAULT_MU_SLACK_REL = 1e-15


class Termination(str, enum.Enum):
    REL_TOL_MET = "RelTolMet"
    MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by all solvers.

    ``mu`` defaults to ``prob.spec_norm_sq + mu_slack``; ``spec_norm_sq``
    already carries the power-iteration inflation, so ``mu > ||A||^2``.
    ``mu_slack`` defaults to ``1e-15 * max(1, spec_norm_sq)``.  ``eta`` is
    the momentum factor of MIST; ``eta_schedule(k)``, when given, overrides
    it per iteration.  ``eta = 0`` switches the momentum off.
    """

    lam: float
    mu: Optional[float] = None
    mu_slack: Optional[float] = None
    eta: float = DEFAULT_ETA
    eta_schedule: Optional[Callable[[int], float]] = field(default=None, compare=False)
    rel_tol: float = DEFAULT_REL_TOL
    max_iters: int = 10_000
    record_trace: bool = False

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidConfigError(f"lam must be positive and finite, got {self.lam}")
        if not 0.0 <= self.eta < 1.0:
            raise InvalidConfigError(f"eta must lie in [0, 1), got {self.eta}")
        if not self.rel_tol > 0:
            raise InvalidConfigError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_iters) < 1:
            raise InvalidConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.mu_slack is not None and self.mu_slack < 0:
            raise InvalidConfigError(f"mu_slack must be >= 0, got {self.mu_slack}")

    def resolve_mu(self, prob: ProblemInstance) -> float:
        if self.mu is not None:
            mu = float(self.mu)
        else:
            slack = self.mu_slack
            if slack is None:
                slack = DEFAULT_MU_SLACK_REL * max(1.0, prob.spec_norm_sq)
            mu = prob.spec_norm_sq + slack
        if not mu > prob.spec_norm_sq:
            raise InvalidConfigError(
                f"mu={mu!r} does not exceed the spectral bound {prob.spec_norm_sq!r}")
        return mu

    def eta_at(self, k: int) -> float:
        if self.eta_schedule is None:
            return self.eta
        eta = float(self.eta_schedule(k))
        if not 0.0 <= eta < 1.0:
            raise InvalidConfigError(f"eta_schedule({k}) = {eta} outside [0, 1)")
        return eta

    def with_lam(self, lam: float) -> "SolverConfig":
        return replace(self, lam=lam)


@dataclass
class SolverRun:
    """Outcome of one solver run.

    Trace entry ``i`` describes iterate ``x_{i+1}``: its objective, the step
    ``||x_{i+1} - x_i||``, the momentum coefficient used to produce it and
    the elapsed wall time (seconds since the solve started, monotonic
    clock).  ``initial_objective`` is ``F(x_0)``.
    """

    solver: str
    lam: float
    mu: float
    x_final: np.ndarray
    initial_objective: float
    objective_trace: list = field(default_factory=list)
    step_norm_trace: list = field(default_factory=list)
    alpha_trace: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    termination: Termination = Termination.MAX_ITERS
    eta: Optional[float] = None
    x_trace: Optional[list] = None

    @property
    def iterations(self) -> int:
        return len(self.objective_trace)

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else self.initial_objective

    @property
    def converged(self) -> bool:
        return self.termination is Termination.REL_TOL_MET

    def relative_error(self, f_star: Optional[float] = None) -> np.ndarray:
        """``|F(x_k) - F*| / |F*|`` per iteration, ``F*`` defaulting to the run's final value."""
        f_star = self.final_objective if f_star is None else f_star
        obj = np.asarray(self.objective_trace)
        if f_star == 0:
            return np.abs(obj)
        return np.abs(obj - f_star) / abs(f_star)

    def first_reach(self, threshold: float, f_star: Optional[float] = None):
        """Iterations and seconds until the relative error first drops to ``threshold``.

        Returns ``(None, None)`` when never reached.
        """
        err = self.relative_error(f_star)
        hit = np.flatnonzero(err <= threshold)
        if hit.size == 0:
            return None, None
        i = int(hit[0])
        return i + 1, self.wall_times[i]

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "solver": self.solver,
            "lam": self.lam,
            "mu": self.mu,
            "eta": self.eta,
            "iterations": self.iterations,
            "termination": self.termination.value,
            "initial_objective": self.initial_objective,
            "final_objective": self.final_objective,
            "nnz": l0_norm(self.x_final),
            "x_final": np.asarray(self.x_final).tolist(),
            "objective_trace": list(map(float, self.objective_trace)),
            "step_norm_trace": list(map(float, self.step_norm_trace)),
            "alpha_trace": list(map(float, self.alpha_trace)),
            "wall_times": list(map(float, self.wall_times)),
        }
        if self.x_trace is not None:
            out["x_trace"] = [np.asarray(x).tolist() for x in self.x_trace]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SolverRun":
        x_trace = data.get("x_trace")
        return cls(
            solver=data["solver"],
            lam=data["lam"],
            mu=data["mu"],
            eta=data.get("eta"),
            x_final=np.asarray(data["x_final"], dtype=np.float64),
            initial_objective=data["initial_objective"],
            objective_trace=list(data["objective_trace"]),
            step_norm_trace=list(data["step_norm_trace"]),
            alpha_trace=list(data["alpha_trace"]),
            wall_times=list(data["wall_times"]),
            termination=Termination(data["termination"]),
            x_trace=None if x_trace is None else [np.asarray(x) for x in x_trace],
        )

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def read_json(cls, path) -> "SolverRun":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "F", "step_norm", "alpha", "wall_time"])
            rows = zip(self.objective_trace, self.step_norm_trace,
                       self.alpha_trace, self.wall_times)
            for k, (f, s, a, t) in enumerate(rows, start=1):
                writer.writerow([k, repr(float(f)), repr(float(s)), repr(float(a)), repr(float(t))])


class _Recorder:
    """Accumulates traces and applies the relative-decrease stopping rule."""

    def __init__(self, solver, cfg: SolverConfig, mu, f0, x0, eta=None):
        self.cfg = cfg
        self.run = SolverRun(solver=solver, lam=cfg.lam, mu=mu, eta=eta,
                             x_final=x0, initial_objective=f0,
                             x_trace=[x0.copy()] if cfg.record_trace else None)
        self._t0 = time.perf_counter()
        self._f_prev = f0

    def record(self, x_new, f_new, step, alpha, change=None) -> bool:
        """Store iterate ``x_new``; return True when the run should stop.

        ``change`` is the objective change tested by the stopping rule and
        defaults to ``|F(x_new) - F(x_prev)|``.
        """
        run = self.run
        k = run.iterations
        if not math.isfinite(f_new) or not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"{run.solver}: non-finite iterate at iteration {k + 1}", k + 1)
        run.objective_trace.append(f_new)
        run.step_norm_trace.append(step)
        run.alpha_trace.append(alpha)
        run.wall_times.append(time.perf_counter() - self._t0)
        run.x_final = x_new
        if run.x_trace is not None:
            run.x_trace.append(x_new.copy())
        if change is None:
            change = abs(f_new - self._f_prev)
        self._f_prev = f_new
        # F >= 0; F = 0 is an exact fit and cannot decrease further
        if f_new == 0.0 or change / f_new < self.cfg.rel_tol:
            run.termination = Termination.REL_TOL_MET
            return True
        if run.iterations >= self.cfg.max_iters:
            run.termination = Termination.MAX_ITERS
            return True
        return False


def objective_from_residual(prob: ProblemInstance, u, x, lam) -> float:
    r = prob.y - u
    return 0.5 * float(r @ r) + lam * l0_norm(x)
