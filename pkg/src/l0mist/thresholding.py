"""Gradient step, hard thresholding and the resulting prox map of ``Q_mu``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ProblemInstance
from .exceptions import DimensionError, InvalidConfigError


@dataclass(frozen=True)
class ThresholdLevel:
    """Threshold ratio ``h = lam / mu`` and its cut-off ``sqrt(2 h)``."""

    h: float
    boundary: float = field(init=False)

    def __post_init__(self):
        if not self.h > 0 or not math.isfinite(self.h):
            raise ValueError(f"threshold ratio must be positive and finite, got {self.h}")
        object.__setattr__(self, "boundary", math.sqrt(2.0 * self.h))

    @classmethod
    def from_penalty(cls, lam: float, mu: float) -> "ThresholdLevel":
        return cls(lam / mu)


def gradient_step(prob: ProblemInstance, mu: float, x) -> np.ndarray:
    """``g(x) = x - (1/mu) * grad f(x)``."""
    if not mu > 0:
        raise InvalidConfigError(f"mu must be positive, got {mu}")
    x = prob.check_x(x)
    v = prob.rmatvec(prob.matvec(x))
    return x - (v - prob.y_bar) / mu


def hard_threshold(g_vec, ref_vec, level: ThresholdLevel) -> np.ndarray:
    """Hard-threshold ``g_vec`` at ``level.boundary``.

    Entries strictly below the cut-off in magnitude become exact zeros,
    entries strictly above are copied.  An entry sitting exactly on the
    cut-off is kept only where ``ref_vec`` is nonzero; both choices minimise
    the one-dimensional problem there, and following the support of the
    reference point is what makes the map closed along iterate sequences.
    """
    g_vec = np.asarray(g_vec, dtype=np.float64)
    ref_vec = np.asarray(ref_vec, dtype=np.float64)
    if g_vec.shape != ref_vec.shape or g_vec.ndim != 1:
        raise DimensionError(
            f"hard_threshold needs equal-length vectors, got {g_vec.shape} and {ref_vec.shape}")
    mag = np.abs(g_vec)
    keep = (mag > level.boundary) | ((mag == level.boundary) & (ref_vec != 0))
    return np.where(keep, g_vec, 0.0)


def prox_step(prob: ProblemInstance, mu: float, lam: float, x) -> np.ndarray:
    """One majorize-minimize step: a minimiser of ``Q_mu(., x)`` chosen by
    thresholding ``g(x)`` with ``x`` as tie reference."""
    if not mu > prob.spec_norm_sq:
        raise InvalidConfigError(
            f"mu={mu} must exceed the spectral bound {prob.spec_norm_sq}")
    if not lam > 0:
        raise InvalidConfigError(f"lam must be positive, got {lam}")
    x = prob.check_x(x)
    return hard_threshold(gradient_step(prob, mu, x), x, ThresholdLevel.from_penalty(lam, mu))
