"""CSV readers and writers for coefficients, tables and metric instances.

Lines starting with ``#`` are metadata (config hash, schema version) and are
skipped by every reader here.  Floats are written with ``repr`` so values
round-trip through binary64.
"""

from __future__ import annotations

import csv
import math
import io
import os
from typing import Iterable, Sequence

import numpy as np

from .errors import PreconditionError
from .spectral import TrigPolynomial


def _open_lines(path_or_text) -> list[str]:
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(os.fspath(path_or_text), newline="") as fh:
            text = fh.read()
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    return buf.getvalue()


def coeff_csv(poly: TrigPolynomial, comments: Sequence[str] = ()) -> str:
    header = [f"k{j + 1}" for j in range(poly.dim)] + ["re", "im"]
    rows = [list(k) + [c.real, c.imag] for k, c in zip(poly.freqs.tolist(), poly.coeffs)]
    return rows_to_csv(header, rows, comments)


def write_coeff_csv(poly: TrigPolynomial, path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(coeff_csv(poly, comments))


def read_coeff_csv(path_or_text) -> TrigPolynomial:
    lines = _open_lines(path_or_text)
    if not lines:
        raise PreconditionError("empty coefficient file")
    reader = csv.reader(lines)
    header = next(reader)
    if header[-2:] != ["re", "im"] or not all(h.startswith("k") for h in header[:-2]):
        raise PreconditionError(f"coefficient header must be k1..kv,re,im, got {header}")
    dim = len(header) - 2
    freqs, coeffs = [], []
    for row in reader:
        freqs.append([int(x) for x in row[:dim]])
        coeffs.append(complex(float(row[dim]), float(row[dim + 1])))
    return TrigPolynomial(dim, np.array(freqs, dtype=np.int64).reshape(-1, dim), coeffs)


def _cell(x: str) -> float:
    try:
        return float(x)
    except ValueError:
        return math.nan


def read_table(path_or_text) -> tuple[list[str], np.ndarray]:
    """CSV with a header row; non-numeric cells read as NaN."""
    lines = _open_lines(path_or_text)
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[_cell(x) for x in row] for row in reader], dtype=float)
    return header, data.reshape(-1, len(header))
