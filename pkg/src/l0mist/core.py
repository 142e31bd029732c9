"""Dense least-squares model, the l0-penalized objective and its majorizer.

The model is ``y = A x + noise`` with a dense ``d x m`` design ``A``.  The
objective is

    F(x) = 0.5 * ||y - A x||^2 + lam * ||x||_0

and ``Q_mu(z, x)`` is the quadratic upper bound of ``F`` built at ``x``,
valid whenever ``mu >= ||A||^2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, SpectralNormError

logger = logging.getLogger(__name__)

#: Relative accuracy of the power-iteration estimate of ``||A||^2``.
SPECTRAL_REL_TOL = 1e-6
SPECTRAL_MAX_ITERS = 10_000


def as_matrix(A) -> np.ndarray:
    """Return ``A`` as a C-contiguous float64 matrix, validating shape and values."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"design matrix must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"design matrix must be non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("design matrix contains non-finite entries")
    return A


def _as_vector(v, length: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != length:
        raise DimensionError(f"{name} must be a vector of length {length}, got shape {v.shape}")
    return v


def spectral_norm_sq(A, rel_tol: float = SPECTRAL_REL_TOL,
                     max_iters: int = SPECTRAL_MAX_ITERS, seed: int = 0) -> float:
    """Estimate ``||A||^2`` (largest eigenvalue of ``A^T A``) by power iteration.

    The returned Rayleigh quotient never exceeds the true value.  Iteration
    stops once the geometric extrapolation of the remaining increase, based
    on the ratio of the last two increments, drops below ``rel_tol / 2``
    relative, so that ``est <= ||A||^2 <= est * (1 + rel_tol)``.

    Parameters
    ----------
    A : array_like, shape (d, m)
    rel_tol : float
        Target relative accuracy, in (0, 1).
    max_iters : int
        Iteration cap; exceeding it raises :class:`SpectralNormError`
        carrying the best estimate.
    seed : int
        Seed of the Gaussian start vector.

    Returns
    -------
    float
    """
    A = as_matrix(A)
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    if not np.any(A):
        return 0.0

    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    theta_prev = None
    incr_prev = None
    ratio_prev = None
    theta = 0.0
    for it in range(1, max_iters + 1):
        u = A @ v
        theta = float(u @ u)
        w = A.T @ u
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # start vector in the null space; restart along a fresh direction
            v = rng.standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / norm_w
        if theta_prev is not None:
            incr = theta - theta_prev
            if incr <= 4 * np.finfo(float).eps * theta:
                logger.debug("power iteration stalled at machine precision after %d its", it)
                return theta
            if incr_prev is not None and incr_prev > 0:
                ratio = incr / incr_prev
                # trust the extrapolation only once the ratio has settled;
                # a drifting ratio means slower modes are still emerging
                settled = ratio_prev is not None and abs(ratio - ratio_prev) <= 0.01 * (1.0 - ratio)
                if ratio < 1.0 and settled:
                    remaining = incr * ratio / (1.0 - ratio)
                    if remaining <= 0.5 * rel_tol * theta:
                        logger.debug("power iteration converged after %d its", it)
                        return theta
                ratio_prev = ratio
            incr_prev = incr
        theta_prev = theta
    raise SpectralNormError(
        f"power iteration did not reach rel_tol={rel_tol} in {max_iters} iterations", theta)


@dataclass(frozen=True)
class ProblemInstance:
    """Design matrix, observations and precomputed quantities.

    ``y_bar = A^T y`` and ``spec_norm_sq`` (an upper bound on ``||A||^2``)
    are computed once.  Arrays are stored read-only.
    """

    A: np.ndarray
    y: np.ndarray
    y_bar: np.ndarray = field(default=None)
    spec_norm_sq: float = field(default=None)

    def __post_init__(self):
        A = as_matrix(self.A).copy()
        y = _as_vector(self.y, A.shape[0], "y").copy()
        if not np.all(np.isfinite(y)):
            raise ValueError("observation vector contains non-finite entries")
        y_bar = A.T @ y if self.y_bar is None else _as_vector(self.y_bar, A.shape[1], "y_bar").copy()
        if self.spec_norm_sq is None:
            bound = spectral_norm_sq(A) * (1.0 + SPECTRAL_REL_TOL)
        else:
            bound = float(self.spec_norm_sq)
            if bound < 0 or not np.isfinite(bound):
                raise ValueError(f"spec_norm_sq must be finite and >= 0, got {bound}")
        for arr in (A, y, y_bar):
            arr.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_bar", y_bar)
        object.__setattr__(self, "spec_norm_sq", bound)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def check_x(self, x) -> np.ndarray:
        return _as_vector(x, self.m, "x")

    # Solvers touch A only through these two methods.
    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def rmatvec(self, u: np.ndarray) -> np.ndarray:
        return self.A.T @ u


def make_problem(A, y, spec_norm_sq=None) -> ProblemInstance:
    """Build a :class:`ProblemInstance`, estimating ``||A||^2`` when not given."""
    return ProblemInstance(A, y, spec_norm_sq=spec_norm_sq)


def smooth_value(prob: ProblemInstance, x) -> float:
    """``f(x) = 0.5 * ||y - A x||^2``."""
    r = prob.y - prob.matvec(prob.check_x(x))
    return 0.5 * float(r @ r)


def grad_f(prob: ProblemInstance, x) -> np.ndarray:
    """Gradient of the smooth part, ``A^T A x - A^T y``."""
    x = prob.check_x(x)
    return prob.rmatvec(prob.matvec(x)) - prob.y_bar


def l0_norm(x) -> int:
    # exact-zero counting: thresholded iterates carry bit-exact zeros
    return int(np.count_nonzero(x))


@dataclass(frozen=True)
class Objective:
    """``F(x) = f(x) + lam * ||x||_0`` on a fixed problem."""

    problem: ProblemInstance
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")

    def __call__(self, x) -> float:
        return objective_value(self, x)


def objective_value(obj: Objective, x) -> float:
    """Evaluate ``F(x)``."""
    return smooth_value(obj.problem, x) + obj.lam * l0_norm(x)


def q_majorizer(obj: Objective, mu: float, z, x) -> float:
    """``Q_mu(z, x) = f(x) + grad f(x)^T (z - x) + mu/2 ||z - x||^2 + lam ||z||_0``."""
    prob = obj.problem
    z = prob.check_x(z)
    x = prob.check_x(x)
    s = z - x
    return (smooth_value(prob, x) + float(grad_f(prob, x) @ s)
            + 0.5 * mu * float(s @ s) + obj.lam * l0_norm(z))
