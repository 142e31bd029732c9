"""Check the fixed-point conditions of the thresholded gradient map.

A point ``x`` with zero set ``Z`` and support ``S`` is a fixed point of
``x -> H_{lam/mu}(x - grad f(x) / mu)`` exactly when

* ``|grad f(x)[i]| <= sqrt(2 lam mu)`` on ``Z``,
* ``grad f(x)[i] = 0`` on ``S``,
* ``|x[i]| >= sqrt(2 lam / mu)`` on ``S``.

Such points are strict local minimisers of ``F``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..core import ProblemInstance, grad_f


@dataclass(frozen=True)
class FixedPointReport:
    zero_set: tuple
    support_set: tuple
    #: ``min_Z (sqrt(2 lam mu) - |grad f|)``; ``inf`` when ``Z`` is empty
    c1_margin: float
    #: ``max_S |grad f|``; ``0`` when ``S`` is empty
    c2_residual: float
    #: ``min_S (|x| - sqrt(2 lam / mu))``; ``inf`` when ``S`` is empty
    c3_margin: float
    tol: float
    certified: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["zero_set"] = list(self.zero_set)
        out["support_set"] = list(self.support_set)
        # JSON has no infinity
        for key in ("c1_margin", "c3_margin"):
            if math.isinf(out[key]):
                out[key] = None
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FixedPointReport":
        data = dict(data)
        for key in ("c1_margin", "c3_margin"):
            if data[key] is None:
                data[key] = math.inf
        data["zero_set"] = tuple(data["zero_set"])
        data["support_set"] = tuple(data["support_set"])
        return cls(**data)

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def certify_fixed_point(prob: ProblemInstance, lam: float, mu: float, x, tol: float) -> FixedPointReport:
    """Evaluate the three fixed-point conditions at ``x`` with slack ``tol``."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    x = prob.check_x(x)
    grad = grad_f(prob, x)
    on_support = x != 0
    zero_idx = np.flatnonzero(~on_support)
    supp_idx = np.flatnonzero(on_support)
    abs_grad = np.abs(grad)

    c1 = float(np.min(math.sqrt(2 * lam * mu) - abs_grad[zero_idx])) if zero_idx.size else math.inf
    c2 = float(np.max(abs_grad[supp_idx])) if supp_idx.size else 0.0
    c3 = float(np.min(np.abs(x[supp_idx]) - math.sqrt(2 * lam / mu))) if supp_idx.size else math.inf
    return FixedPointReport(
        zero_set=tuple(int(i) for i in zero_idx),
        support_set=tuple(int(i) for i in supp_idx),
        c1_margin=c1,
        c2_residual=c2,
        c3_margin=c3,
        tol=tol,
        certified=bool(c1 >= -tol and c2 <= tol and c3 >= -tol),
    )
