from .baselines import fista_hard_solve, iht_solve, mfista_hard_solve, next_t
from .certify import FixedPointReport, certify_fixed_point
from .mist import IterateState, initial_state, mist_solve, mist_step, momentum_alpha
from .run import SolverConfig, SolverRun, Termination

SOLVERS = {
    "mist": mist_solve,
    "iht": iht_solve,
    "fista": fista_hard_solve,
    "mfista": mfista_hard_solve,
}


def get_solver(name: str):
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None


__all__ = [
    "SOLVERS", "get_solver",
    "SolverConfig", "SolverRun", "Termination",
    "IterateState", "initial_state", "momentum_alpha", "mist_step", "mist_solve",
    "iht_solve", "fista_hard_solve", "mfista_hard_solve", "next_t",
    "FixedPointReport", "certify_fixed_point",
]
