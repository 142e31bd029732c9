"""Command-line front end.

Subcommands::

    generate   write synthetic instances plus a manifest
    solve      run one solver on one instance
    compare    race several solvers at a common lambda
    sweep      criterion curve over a lambda grid for one instance

Exit codes: 0 converged / success, 2 iteration cap reached, 3 divergence,
4 I/O or malformed input, 5 bad arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import ExperimentSpec, count_instances, load_instance, make_instance, write_instances
from .exceptions import DivergenceError, InputFormatError, InvalidConfigError
from .experiments import compare
from .selection import DEFAULT_GRID, Criterion, lambda_grid_relative, sweep
from .solvers import SOLVERS, SolverConfig, Termination, certify_fixed_point, get_solver
from .solvers.run import DEFAULT_ETA, DEFAULT_REL_TOL

EXIT_OK = 0
EXIT_MAX_ITERS = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
EXIT_BAD_ARGS = 5

log = logging.getLogger("l0mist")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; that code means 'iteration cap' here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_ARGS, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _grid(text):
    try:
        lo, hi, n = text.split(",")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi,n, got {text!r}") from None


def _add_spec_args(p):
    g = p.add_argument_group("instance generation")
    g.add_argument("--preset", choices=["paper", "desk"], default="paper",
                   help="paper: 8192 x 16384, 150 spikes; desk: 512 x 1024, 15 spikes")
    g.add_argument("--d", type=int, help="number of measurements (rows of A)")
    g.add_argument("--m", type=int, help="signal length (columns of A)")
    g.add_argument("--spikes", type=int, help="number of nonzero entries of x")
    g.add_argument("--sigma", type=float, default=3.0,
                   help="noise level on the full-size scale; the desk preset rescales it "
                        "to keep the same SNR (default 3)")
    g.add_argument("--noise", type=float,
                   help="literal noise standard deviation, bypassing preset scaling")
    g.add_argument("--seed", type=int, default=0)


def _add_cfg_args(p):
    g = p.add_argument_group("solver settings")
    g.add_argument("--eta", type=float, default=DEFAULT_ETA, help="MIST momentum factor in [0, 1)")
    g.add_argument("--mu-slack", type=float,
                   help="additive margin of mu above the spectral bound "
                        "(default 1e-15 * max(1, bound))")
    g.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    g.add_argument("--max-iters", type=int, default=10_000)


def _add_lambda_args(p, required):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--lambda", dest="lam", type=float, help="penalty weight")
    g.add_argument("--lambda-frac", type=float,
                   help="penalty weight as a fraction of ||A^T y||_inf")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="l0mist", description="l0-penalised least squares solvers and benchmarks")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic instances and a manifest")
    _add_spec_args(g)
    g.add_argument("--instances", type=int, default=1, help="number of instances (default 1)")
    g.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("solve", help="run one solver on one instance")
    s.add_argument("instance", help="instance directory, or a manifest / generate output directory")
    s.add_argument("--index", type=int, default=0, help="instance index within a manifest")
    s.add_argument("--solver", choices=sorted(SOLVERS), default="mist")
    _add_lambda_args(s, required=True)
    _add_cfg_args(s)
    s.add_argument("--cert-tol", type=float, default=1e-6, help="fixed-point certificate tolerance")
    s.add_argument("--out", required=True)

    c = sub.add_parser("compare", help="race solvers at a common lambda")
    c.add_argument("--from", dest="source",
                   help="generate output directory; otherwise instances are generated in memory")
    _add_spec_args(c)
    c.add_argument("--instances", type=int, default=10, help="number of instances (default 10)")
    c.add_argument("--solver", "--solvers", dest="solvers", default="mist,iht,fista,mfista",
                   help="comma-separated solver names")
    _add_lambda_args(c, required=False)
    _add_cfg_args(c)
    c.add_argument("--criterion", choices=[x.value for x in Criterion], default="ebic")
    c.add_argument("--grid", type=_grid, default=DEFAULT_GRID,
                   help="relative grid lo,hi,n in units of ||A^T y||_inf (default 1e-4,0.2,20)")
    c.add_argument("--gamma", type=float, help="EBIC gamma (default 1 - 1/(2 kappa))")
    c.add_argument("--select-instances", type=int,
                   help="instances used for lambda selection (default all)")
    c.add_argument("--jobs", type=int, default=1,
                   help="worker threads; keep 1 when wall times are compared")
    c.add_argument("--out", required=True)

    w = sub.add_parser("sweep", help="criterion curve over a lambda grid")
    w.add_argument("instance")
    w.add_argument("--index", type=int, default=0)
    w.add_argument("--solver", choices=sorted(SOLVERS), default="mist")
    _add_cfg_args(w)
    w.add_argument("--criterion", choices=[x.value for x in Criterion], default="ebic")
    w.add_argument("--grid", type=_grid, default=DEFAULT_GRID)
    w.add_argument("--gamma", type=float)
    w.add_argument("--cert-tol", type=float, default=1e-6)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", required=True)
    return p


def _spec_from_args(args, n_instances) -> ExperimentSpec:
    overrides = {k: v for k, v in (("d", args.d), ("m", args.m), ("n_spikes", args.spikes))
                 if v is not None}
    if args.noise is not None:
        overrides["sigma"] = args.noise
    if args.preset == "desk" and args.spikes is not None and args.noise is None:
        # hold the SNR of the full-size setting for a custom spike count
        overrides["sigma"] = args.sigma * np.sqrt(args.spikes / 150.0)
    spec = ExperimentSpec.preset(args.preset, sigma=args.sigma, seed=args.seed, n_instances=n_instances)
    return replace(spec, **overrides)


def _cfg_from_args(args, lam=1.0) -> SolverConfig:
    return SolverConfig(lam=lam, mu_slack=args.mu_slack, eta=args.eta,
                        rel_tol=args.rel_tol, max_iters=args.max_iters)


def _cfg_dict(cfg: SolverConfig) -> dict:
    out = asdict(cfg)
    out.pop("eta_schedule", None)
    return out


def _resolve_lambda(args, anchor: float) -> float:
    if args.lam is not None:
        return args.lam
    return args.lambda_frac * anchor


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=1))


def _manifest(args, **extra) -> dict:
    return {"tool": "l0mist", "version": __version__, "command": args.command,
            "output": str(Path(args.out)), **extra}


def cmd_generate(args) -> int:
    spec = _spec_from_args(args, args.instances)
    manifest = write_instances(spec, args.out)
    print(f"wrote {len(manifest['instances'])} instance(s) to {args.out} "
          f"(d={spec.d}, m={spec.m}, spikes={spec.n_spikes}, sigma={spec.sigma:.6g})")
    return EXIT_OK


def cmd_solve(args) -> int:
    prob, _ = load_instance(args.instance, args.index)
    lam = _resolve_lambda(args, float(np.max(np.abs(prob.y_bar))))
    cfg = _cfg_from_args(args, lam)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run_manifest.json", _manifest(
        args, instance=str(args.instance), index=args.index, solvers=[args.solver],
        config=_cfg_dict(cfg)))
    try:
        run = get_solver(args.solver)(prob, cfg)
    except DivergenceError as exc:
        log.error("%s", exc)
        _write_json(out / "run.json", {"solver": args.solver, "lam": lam,
                                       "termination": "Diverged", "iteration": exc.iteration})
        return EXIT_DIVERGED
    run.write_json(out / "run.json")
    run.write_csv(out / "trace.csv")
    report = certify_fixed_point(prob, lam, run.mu, run.x_final, args.cert_tol)
    report.write_json(out / "fixed_point.json")
    print(f"{args.solver}: {run.termination.value} after {run.iterations} iterations, "
          f"F = {run.final_objective:.12g}, nnz = {int(np.count_nonzero(run.x_final))}, "
          f"certified = {report.certified}")
    return EXIT_OK if run.termination is Termination.REL_TOL_MET else EXIT_MAX_ITERS


def cmd_compare(args) -> int:
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for name in solvers:
        get_solver(name)
    if len(solvers) < 2:
        raise UsageError("compare needs at least two solvers")
    if args.source:
        n = count_instances(args.source)
        loaded = [load_instance(args.source, i) for i in range(n)]
        problems = [p for p, _ in loaded]
        x_trues = [x for _, x in loaded]
        if any(x is None for x in x_trues):
            x_trues = None
        spec = None
    else:
        spec = _spec_from_args(args, args.instances)
        insts = [make_instance(spec, i) for i in range(args.instances)]
        problems = [i.problem for i in insts]
        x_trues = [i.x_true for i in insts]
    if args.criterion == "mse" and x_trues is None:
        raise UsageError("MSE selection needs x_true for every instance")
    if args.jobs > 1:
        log.warning("--jobs > 1: wall times are measured under concurrency")

    cfg = _cfg_from_args(args)
    lam = None
    if args.lam is not None or args.lambda_frac is not None:
        anchor = float(np.mean([np.max(np.abs(p.y_bar)) for p in problems]))
        lam = _resolve_lambda(args, anchor)
    report = compare(problems, solvers, cfg, lam=lam, criterion=args.criterion,
                     x_trues=x_trues, grid=args.grid, gamma=args.gamma,
                     n_select=args.select_instances, jobs=args.jobs)
    report.meta = {"criterion": args.criterion, "grid": list(args.grid),
                   "n_instances": len(problems)}
    report.write(args.out)
    _write_json(Path(args.out) / "run_manifest.json", _manifest(
        args, spec=None if spec is None else spec.to_dict(), source=args.source,
        solvers=solvers, config=_cfg_dict(cfg), grid=list(args.grid),
        criterion=args.criterion))
    print(f"common lambda = {report.lam:.6g}")
    for name in solvers:
        n_div = sum(r is None for r in report.runs[name])
        med = report.median_seconds_to(name, 1e-6)
        med_text = "n/a" if med is None else f"{med:.4g}s"
        print(f"  {name:7s} median time to 1e-6: {med_text}" + (f", {n_div} diverged" if n_div else ""))
    return EXIT_OK


def cmd_sweep(args) -> int:
    prob, x_true = load_instance(args.instance, args.index)
    if args.criterion == "mse" and x_true is None:
        raise UsageError(f"{args.instance}: MSE needs x_true.csv next to the instance")
    lo, hi, n = args.grid
    grid = lambda_grid_relative(prob, lo, hi, n)
    cfg = _cfg_from_args(args)
    res = sweep(prob, grid, args.solver, cfg, args.criterion, x_true=x_true,
                gamma=args.gamma, jobs=args.jobs, cert_tol=args.cert_tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.write_json(out / "selection.json")
    res.write_csv(out / "selection.csv")
    _write_json(out / "run_manifest.json", _manifest(
        args, instance=str(args.instance), index=args.index, solvers=[args.solver],
        config=_cfg_dict(cfg), grid=list(args.grid), criterion=args.criterion))
    print(f"best lambda = {res.lambda_best:.6g} (grid index {res.index_best})")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "compare": cmd_compare, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        where = f"{exc.filename}: " if exc.filename else ""
        print(f"error: {where}{exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, InvalidConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS


if __name__ == "__main__":
    sys.exit(main())
