"""Synthetic compressed-sensing instances.

Gaussian design, randomly placed +/-1 spikes and additive Gaussian noise.
All draws come from numpy's counter-based Philox generator; each generator
function is a pure function of its seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import ProblemInstance, as_matrix
from .exceptions import DimensionError, InputFormatError, InvalidConfigError

PRNG_NAME = f"numpy.random.Philox (numpy {np.__version__})"

PAPER_D = 8192
PAPER_M = 16384
PAPER_SPIKES = 150
#: Noise levels of the full-size experiment and their nominal SNR labels.
PAPER_SIGMAS = (3.0, 6.0, 10.0)


def rng_for(seed) -> np.random.Generator:
    """Philox generator for an int seed or a :class:`numpy.random.SeedSequence`."""
    return np.random.Generator(np.random.Philox(seed))


def gen_design(d: int, m: int, seed) -> np.ndarray:
    """``d x m`` matrix of i.i.d. standard normal entries."""
    if d < 1 or m < 1:
        raise DimensionError(f"design dimensions must be positive, got {d}x{m}")
    return rng_for(seed).standard_normal((d, m))


def gen_spikes(m: int, n_spikes: int, seed) -> np.ndarray:
    """Length-``m`` vector with ``n_spikes`` entries equal to +/-1 at random positions.

    Positions are the first ``n_spikes`` indices of a seeded permutation;
    signs are fair coin flips.
    """
    if not 0 <= n_spikes <= m:
        raise InvalidConfigError(f"n_spikes={n_spikes} must lie in [0, m={m}]")
    rng = rng_for(seed)
    idx = rng.permutation(m)[:n_spikes]
    x = np.zeros(m)
    x[idx] = rng.choice(np.array([-1.0, 1.0]), size=n_spikes)
    return x


def gen_observation(A, x, sigma: float, seed) -> np.ndarray:
    """``y = A x + sigma * z`` with ``z`` standard normal."""
    A = as_matrix(A)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.shape[1],):
        raise DimensionError(f"x must have length {A.shape[1]}, got shape {x.shape}")
    if sigma < 0:
        raise InvalidConfigError(f"sigma must be >= 0, got {sigma}")
    y = A @ x
    if sigma > 0:
        y = y + sigma * rng_for(seed).standard_normal(A.shape[0])
    return y


def snr(A, x, sigma: float, d=None) -> float:
    """``10 log10(||A x||^2 / (sigma^2 d))`` in dB."""
    if not sigma > 0:
        raise ValueError("SNR is infinite for sigma = 0")
    A = as_matrix(A)
    d = A.shape[0] if d is None else d
    s = A @ np.asarray(x, dtype=np.float64)
    return 10.0 * math.log10(float(s @ s) / (sigma ** 2 * d))


def sigma_for_snr(snr_db: float, n_spikes: int) -> float:
    """Noise level giving the target SNR in expectation, using ``E||Ax||^2 = d * n_spikes``."""
    return math.sqrt(n_spikes / 10.0 ** (snr_db / 10.0))


def nominal_snr(n_spikes: int, sigma: float) -> float:
    """Expected SNR, ``10 log10(n_spikes / sigma^2)``, for unit spikes."""
    return 10.0 * math.log10(n_spikes / sigma ** 2)


@dataclass(frozen=True)
class ExperimentSpec:
    d: int = PAPER_D
    m: int = PAPER_M
    n_spikes: int = PAPER_SPIKES
    sigma: float = 3.0
    seed: int = 0
    n_instances: int = 10

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise InvalidConfigError(f"d and m must be positive, got {self.d}, {self.m}")
        if not 0 <= self.n_spikes <= self.m:
            raise InvalidConfigError(f"n_spikes={self.n_spikes} exceeds m={self.m}")
        if self.sigma < 0:
            raise InvalidConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.n_instances < 1:
            raise InvalidConfigError("n_instances must be >= 1")

    @property
    def density(self) -> float:
        return self.n_spikes / self.m

    @property
    def nominal_snr(self) -> float:
        return nominal_snr(self.n_spikes, self.sigma) if self.sigma > 0 else math.inf

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def preset(cls, name: str, sigma: float = 3.0, **overrides) -> "ExperimentSpec":
        """``paper``: full-size setting.  ``desk``: 512 x 1024 with 15 spikes,
        noise scaled so that the nominal SNR equals the full-size one at the
        same ``sigma``."""
        if name == "paper":
            spec = dict(d=PAPER_D, m=PAPER_M, n_spikes=PAPER_SPIKES, sigma=sigma)
        elif name == "desk":
            n = 15
            spec = dict(d=512, m=1024, n_spikes=n,
                        sigma=sigma * math.sqrt(n / PAPER_SPIKES))
        else:
            raise InvalidConfigError(f"unknown preset {name!r}")
        spec.update(overrides)
        return cls(**spec)


@dataclass(frozen=True)
class Instance:
    """One generated instance: problem data plus the ground truth."""

    problem: ProblemInstance
    x_true: np.ndarray
    sigma: float
    seed: int
    index: int


def instance_seeds(seed: int, index: int):
    """Independent seed streams for the design, the spikes and the noise."""
    return np.random.SeedSequence([seed, index]).spawn(3)


def make_instance(spec: ExperimentSpec, index: int = 0) -> Instance:
    s_design, s_spikes, s_noise = instance_seeds(spec.seed, index)
    A = gen_design(spec.d, spec.m, s_design)
    x = gen_spikes(spec.m, spec.n_spikes, s_spikes)
    y = gen_observation(A, x, spec.sigma, s_noise)
    return Instance(ProblemInstance(A, y), x, spec.sigma, spec.seed, index)


MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = 1


def write_instances(spec: ExperimentSpec, out_dir, n_instances=None) -> dict:
    """Generate instances and write them under ``out_dir``.

    Layout: ``manifest.json`` plus ``instance_NNN/{A.mtx, y.csv, x_true.csv}``.
    The manifest holds no timestamps, so rewriting with the same seed
    reproduces every file byte for byte.
    """
    from . import __version__
    from .mmio import write_matrix_market, write_vector

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = spec.n_instances if n_instances is None else n_instances
    entries = []
    for i in range(n):
        inst = make_instance(spec, i)
        sub = out / f"instance_{i:03d}"
        sub.mkdir(exist_ok=True)
        write_matrix_market(sub / "A.mtx", inst.problem.A)
        write_vector(sub / "y.csv", inst.problem.y)
        write_vector(sub / "x_true.csv", inst.x_true)
        entry = {"index": i, "dir": sub.name, "A": f"{sub.name}/A.mtx",
                 "y": f"{sub.name}/y.csv", "x_true": f"{sub.name}/x_true.csv"}
        if spec.sigma > 0:
            entry["snr_db"] = snr(inst.problem.A, inst.x_true, spec.sigma)
        entries.append(entry)
    manifest = {
        "format": MANIFEST_FORMAT,
        "tool": "l0mist",
        "version": __version__,
        "prng": PRNG_NAME,
        "spec": spec.to_dict(),
        "density": spec.density,
        "nominal_snr_db": spec.nominal_snr if spec.sigma > 0 else None,
        "instances": entries,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1))
    return manifest


def load_instance(path, index: int = 0):
    """Load ``(ProblemInstance, x_true or None)`` from an instance directory,
    or from a manifest (file or directory containing one) plus ``index``."""
    from .mmio import read_matrix_market, read_vector

    path = Path(path)
    if path.is_dir() and not (path / "A.mtx").exists():
        path = path / MANIFEST_NAME
    if path.is_file():
        try:
            manifest = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputFormatError(path, exc.lineno, exc.msg) from None
        entries = manifest.get("instances", [])
        if not 0 <= index < len(entries):
            raise InputFormatError(path, None, f"no instance with index {index}")
        path = path.parent / entries[index]["dir"]
    A = read_matrix_market(path / "A.mtx")
    y = read_vector(path / "y.csv")
    if y.shape[0] != A.shape[0]:
        raise InputFormatError(path / "y.csv", None,
                               f"length {y.shape[0]} does not match {A.shape[0]} rows of A")
    x_true = None
    if (path / "x_true.csv").exists():
        x_true = read_vector(path / "x_true.csv")
        if x_true.shape[0] != A.shape[1]:
            raise InputFormatError(path / "x_true.csv", None,
                                   f"length {x_true.shape[0]} does not match {A.shape[1]} columns of A")
    return ProblemInstance(A, y), x_true


def count_instances(path) -> int:
    path = Path(path)
    if path.is_dir() and (path / "A.mtx").exists():
        return 1
    if path.is_dir():
        path = path / MANIFEST_NAME
    return len(json.loads(path.read_text()).get("instances", []))
