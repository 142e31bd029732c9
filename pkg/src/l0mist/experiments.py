"""Solver comparison protocol.

For a set of instances and solvers: each solver picks its own
criterion-minimising ``lambda`` per instance over a relative grid, the
picks are averaged per solver, and the smallest average becomes the common
``lambda`` every solver is then raced on.  Progress is measured as
``|F(x_k) - F*| / |F*|`` with ``F*`` the final objective of the same run.
"""
from __future__ import annotations

import csv
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import DivergenceError
from .selection import DEFAULT_GRID, lambda_grid_relative, sweep
from .solvers import SolverConfig, get_solver

THRESHOLDS = (1e-2, 1e-6, 1e-10)


def common_lambda(argmins: dict) -> float:
    """Smallest per-solver average of the selected ``lambda`` values."""
    if not argmins:
        raise ValueError("no solvers given")
    return min(float(np.mean(v)) for v in argmins.values())


def select_argmins(problems, solvers, cfg_template: SolverConfig, criterion="ebic",
                   x_trues=None, grid=DEFAULT_GRID, gamma=None, jobs: int = 1) -> dict:
    """Per solver, the criterion-minimising ``lambda`` on each instance."""
    lo, hi, n = grid
    out = {}
    for name in solvers:
        picks = []
        for i, prob in enumerate(problems):
            lam_grid = lambda_grid_relative(prob, lo, hi, n)
            x_true = None if x_trues is None else x_trues[i]
            res = sweep(prob, lam_grid, name, cfg_template, criterion, x_true=x_true,
                        gamma=gamma, jobs=jobs)
            picks.append(res.lambda_best)
        out[name] = picks
    return out


def race(problems, solvers, lam: float, cfg_template: SolverConfig, jobs: int = 1) -> dict:
    """Run every solver on every instance at ``lam``; diverged runs are ``None``.

    Use ``jobs=1`` when wall times are to be compared.
    """
    cfg = cfg_template.with_lam(lam)

    def one(args):
        name, prob = args
        try:
            return get_solver(name)(prob, cfg)
        except DivergenceError:
            return None

    tasks = [(name, prob) for name in solvers for prob in problems]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(one, tasks))
    else:
        flat = [one(t) for t in tasks]
    n = len(problems)
    return {name: flat[j * n:(j + 1) * n] for j, name in enumerate(solvers)}


@dataclass
class CompareReport:
    lam: float
    argmins: dict
    runs: dict
    thresholds: tuple = THRESHOLDS
    meta: dict = field(default_factory=dict)

    def summary_rows(self):
        for name, runs in self.runs.items():
            for i, run in enumerate(runs):
                row = {"solver": name, "instance": i}
                if run is None:
                    row.update(diverged=True, iterations=None, seconds=None, final_F=None,
                               termination="Diverged")
                else:
                    row.update(diverged=False, iterations=run.iterations,
                               seconds=run.wall_times[-1] if run.wall_times else 0.0,
                               final_F=run.final_objective, termination=run.termination.value)
                for thr in self.thresholds:
                    its, secs = (None, None) if run is None else run.first_reach(thr)
                    row[f"iters_to_{thr:g}"] = its
                    row[f"secs_to_{thr:g}"] = secs
                yield row

    def median_seconds_to(self, name: str, threshold: float) -> Optional[float]:
        secs = [run.first_reach(threshold)[1] for run in self.runs[name] if run is not None]
        secs = [s for s in secs if s is not None]
        return statistics.median(secs) if secs else None

    def iterations_to(self, name: str, threshold: float) -> list:
        return [None if run is None else run.first_reach(threshold)[0] for run in self.runs[name]]

    def write(self, out_dir) -> list:
        """Write one trace CSV per solver plus ``summary.csv`` and ``compare.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, runs in self.runs.items():
            path = out / f"trace_{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["instance", "k", "rel_err", "wall_time", "F"])
                for i, run in enumerate(runs):
                    if run is None:
                        continue
                    err = run.relative_error()
                    for k, (e, t, f) in enumerate(zip(err, run.wall_times, run.objective_trace), 1):
                        w.writerow([i, k, repr(float(e)), repr(float(t)), repr(float(f))])
            written.append(path)
        rows = list(self.summary_rows())
        path = out / "summary.csv"
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        written.append(path)
        path = out / "compare.json"
        path.write_text(json.dumps({
            "lambda": self.lam,
            "argmins": self.argmins,
            "diverged": {n: [r is None for r in runs] for n, runs in self.runs.items()},
            **self.meta,
        }, indent=1))
        written.append(path)
        return written


def compare(problems, solvers: Sequence[str], cfg_template: SolverConfig, lam: Optional[float] = None,
            criterion="ebic", x_trues=None, grid=DEFAULT_GRID, gamma=None,
            n_select: Optional[int] = None, jobs: int = 1) -> CompareReport:
    """Race ``solvers`` on ``problems`` at a common ``lambda``.

    When ``lam`` is None it is chosen by the common-lambda rule using the
    first ``n_select`` instances (all by default).
    """
    if len(solvers) < 2:
        raise ValueError("comparison needs at least two solvers")
    if not problems:
        raise ValueError("comparison needs at least one instance")
    argmins = {}
    if lam is None:
        k = len(problems) if n_select is None else n_select
        sel_x = None if x_trues is None else x_trues[:k]
        argmins = select_argmins(problems[:k], solvers, cfg_template, criterion, sel_x,
                                 grid, gamma, jobs)
        lam = common_lambda(argmins)
    runs = race(problems, solvers, lam, cfg_template, jobs)
    return CompareReport(lam=lam, argmins=argmins, runs=runs)
