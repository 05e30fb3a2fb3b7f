"""Long-format CSV input/output for matrix-variate series.

A series is stored one cell per line under the header ``t,row,col,value``,
with 1-based contiguous indices. Floats are written with 17 significant
digits so a write/read cycle reproduces every double exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import MatrixSeries
from .errors import InvalidArgumentError

HEADER = ("t", "row", "col", "value")
MAX_MISSING_LISTED = 20


class ParseError(InvalidArgumentError):
    """Malformed or incomplete input file."""


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _parse_index(text: str, lineno: int, name: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise ParseError(f"line {lineno}: {name} {text!r} is not an integer") from None
    if val < 1:
        raise ParseError(f"line {lineno}: {name} must be >= 1, got {val}")
    return val


def read_long_csv(path) -> np.ndarray:
    """Dense ``(n, p1, p2)`` array from a long CSV file (see module docstring)."""
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"input file not found: {path}")
    cells: dict[tuple[int, int, int], float] = {}
    first_line: dict[tuple[int, int, int], int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        if tuple(h.strip().lower() for h in header) != HEADER:
            raise ParseError(f"line 1: expected header {','.join(HEADER)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != 4:
                raise ParseError(f"line {lineno}: expected 4 fields, got {len(row)}")
            t = _parse_index(row[0].strip(), lineno, "t")
            i = _parse_index(row[1].strip(), lineno, "row")
            j = _parse_index(row[2].strip(), lineno, "col")
            try:
                v = float(row[3])
            except ValueError:
                raise ParseError(f"line {lineno}: value {row[3]!r} is not numeric") from None
            if not math.isfinite(v):
                raise ParseError(f"line {lineno}: value {row[3]!r} is not finite")
            key = (t, i, j)
            if key in cells:
                raise ParseError(
                    f"line {lineno}: duplicate entry t={t}, row={i}, col={j} "
                    f"(first seen on line {first_line[key]})"
                )
            cells[key] = v
            first_line[key] = lineno
    if not cells:
        raise ParseError(f"{path}: no data rows")
    n = max(k[0] for k in cells)
    p1 = max(k[1] for k in cells)
    p2 = max(k[2] for k in cells)
    if len(cells) != n * p1 * p2:
        missing = []
        for t in range(1, n + 1):
            for i in range(1, p1 + 1):
                for j in range(1, p2 + 1):
                    if (t, i, j) not in cells:
                        missing.append(f"({t},{i},{j})")
                        if len(missing) == MAX_MISSING_LISTED:
                            break
                if len(missing) == MAX_MISSING_LISTED:
                    break
            if len(missing) == MAX_MISSING_LISTED:
                break
        total = n * p1 * p2 - len(cells)
        raise ParseError(
            f"incomplete grid for n={n}, p1={p1}, p2={p2}: {total} missing cells, "
            f"e.g. {', '.join(missing)}"
        )
    data = np.empty((n, p1, p2))
    for (t, i, j), v in cells.items():
        data[t - 1, i - 1, j - 1] = v
    return data


def ingest_csv(path) -> MatrixSeries:
    """Read a long CSV file into a :class:`MatrixSeries` (needs ``n >= 2``)."""
    return MatrixSeries(read_long_csv(path))


def write_long_csv(path, data) -> None:
    """Write an ``(n, p1, p2)`` array as ``t,row,col,value`` lines (LF endings)."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 3:
        raise InvalidArgumentError(f"expected an (n, p1, p2) array, got shape {data.shape}")
    n, p1, p2 = data.shape
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(HEADER) + "\n")
        for t in range(n):
            for i in range(p1):
                for j in range(p2):
                    fh.write(f"{t + 1},{i + 1},{j + 1},{fmt(data[t, i, j])}\n")


def write_rows_csv(path, rows: list[dict]) -> None:
    """Write a list of flat dicts as CSV; floats at 17 significant digits."""
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    fields = list(rows[0])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_cell(row[f]) for f in fields])


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def to_jsonable(obj):
    """Convert numpy containers to plain Python for :mod:`json`."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj) -> None:
    # repr(float) is the shortest string that round-trips, so json keeps every bit
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")
