"""Readers and writers for instance files.

Matrices use the Matrix Market *array* format (dense, column-major, one
value per line).  Vectors are plain text with one value per line; commas
and whitespace are both accepted as separators on input, and ``#`` starts a
comment.  Values are written with 17 significant digits so that a write /
read round trip is exact.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .exceptions import InputFormatError

_HEADER = "%%MatrixMarket matrix array real general"
_SPLIT = re.compile(r"[,\s]+")


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except UnicodeDecodeError as exc:
        raise InputFormatError(path, None, f"not a text file ({exc})") from exc


def _parse_values(lines, first_lineno, path) -> np.ndarray:
    """Parse float tokens from ``lines``; on failure report the offending line."""
    try:
        tokens = [t for t in _SPLIT.split(" ".join(lines)) if t]
        return np.array(tokens, dtype=np.float64)
    except ValueError:
        pass
    for offset, line in enumerate(lines):
        for tok in _SPLIT.split(line.strip()):
            if not tok:
                continue
            try:
                float(tok)
            except ValueError:
                raise InputFormatError(path, first_lineno + offset,
                                       f"cannot parse {tok!r} as a number") from None
    raise InputFormatError(path, None, "unparseable numeric data")  # pragma: no cover


def write_matrix_market(path, A) -> None:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {A.shape}")
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"{A.shape[0]} {A.shape[1]}\n")
        np.savetxt(fh, A.ravel(order="F"), fmt="%.17g")


def read_matrix_market(path) -> np.ndarray:
    """Read a dense real matrix in Matrix Market array format."""
    lines = _read_text(path).splitlines()
    if not lines:
        raise InputFormatError(path, 1, "empty file")
    header = lines[0].strip().lower().split()
    if len(header) != 5 or header[0] != "%%matrixmarket" or header[1] != "matrix":
        raise InputFormatError(path, 1, "missing '%%MatrixMarket matrix' banner")
    if header[2] != "array":
        raise InputFormatError(path, 1, f"only the dense 'array' format is supported, got {header[2]!r}")
    if header[3] not in ("real", "integer", "double"):
        raise InputFormatError(path, 1, f"unsupported field {header[3]!r}")
    if header[4] != "general":
        raise InputFormatError(path, 1, f"unsupported symmetry {header[4]!r}")

    i = 1
    while i < len(lines) and (not lines[i].strip() or lines[i].lstrip().startswith("%")):
        i += 1
    if i == len(lines):
        raise InputFormatError(path, i, "missing size line")
    size = lines[i].split()
    try:
        rows, cols = (int(s) for s in size)
    except ValueError:
        raise InputFormatError(path, i + 1, f"bad size line {lines[i]!r}") from None
    if rows < 1 or cols < 1:
        raise InputFormatError(path, i + 1, f"non-positive dimensions {rows}x{cols}")

    body = lines[i + 1:]
    values = _parse_values(body, i + 2, path)
    if values.size != rows * cols:
        raise InputFormatError(path, len(lines),
                               f"expected {rows * cols} values for a {rows}x{cols} matrix, found {values.size}")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise InputFormatError(path, None, f"non-finite entry at value #{bad + 1}")
    return values.reshape((rows, cols), order="F")


def write_vector(path, v) -> None:
    np.savetxt(path, np.asarray(v, dtype=np.float64).ravel(), fmt="%.17g")


def read_vector(path) -> np.ndarray:
    lines = [line.split("#", 1)[0] for line in _read_text(path).splitlines()]
    values = _parse_values(lines, 1, path)
    if values.size == 0:
        raise InputFormatError(path, None, "no values found")
    if not np.all(np.isfinite(values)):
        raise InputFormatError(path, None, "non-finite value")
    return values
