"""CSV and JSON file formats.

A dataset CSV has a header row ``t,<grid values...>`` followed by one row
per curve, ``<curve id>,<values...>``. Labels live in a separate CSV with
header ``label`` and one 1-based integer per row. Rows and columns in error
messages are 1-based file positions.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import FunctionalDataset
from .errors import ParseError

GRID_HEADER = "t"
LABEL_HEADER = "label"


def _float(cell: str, row: int, column: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {cell!r}", row, column)
    return value


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    # tolerate trailing blank lines only
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    return rows


def read_dataset_csv(path, labels_path=None) -> FunctionalDataset:
    """Parse a dataset CSV (and optionally its labels CSV).

    Raises:
        ParseError: naming the offending row and column for ragged rows,
            non-numeric cells or a missing grid header.
    """
    rows = _read_rows(path)
    if not rows:
        raise ParseError("empty dataset file", 1)
    header = rows[0]
    if not header or header[0].strip() != GRID_HEADER:
        raise ParseError(f"first cell must be {GRID_HEADER!r}", 1, 1)
    width = len(header)
    if width < 3:
        raise ParseError("grid row needs at least two points", 1)
    grid = np.array([_float(c, 1, j + 2) for j, c in enumerate(header[1:])])
    if len(rows) < 2:
        raise ParseError("no curve rows after the grid row", 2)
    Y = np.empty((len(rows) - 1, width - 1))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseError(f"expected {width} cells, found {len(row)}", i, min(len(row), width) + 1)
        Y[i - 2] = [_float(c, i, j + 2) for j, c in enumerate(row[1:])]
    labels = None if labels_path is None else read_labels_csv(labels_path)
    if labels is not None and labels.size != Y.shape[0]:
        raise ParseError(f"{labels.size} labels for {Y.shape[0]} curves", labels.size + 2)
    return FunctionalDataset(Y, grid, labels)


def read_labels_csv(path) -> np.ndarray:
    rows = _read_rows(path)
    if not rows or [c.strip() for c in rows[0]] != [LABEL_HEADER]:
        raise ParseError(f"labels file must start with a {LABEL_HEADER!r} header", 1, 1)
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 1:
            raise ParseError(f"expected 1 cell, found {len(row)}", i, 2)
        try:
            value = int(row[0])
        except ValueError:
            raise ParseError(f"label {row[0]!r} is not an integer", i, 1) from None
        if value < 1:
            raise ParseError(f"label {value} is not 1-based", i, 1)
        out.append(value)
    return np.asarray(out, dtype=int)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curves_csv(path, grid, curves, ids=None) -> None:
    """Write rows ``curves`` on ``grid``; ``ids`` default to ``y1, y2, ...``."""
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    ids = ids if ids is not None else [f"y{i + 1}" for i in range(curves.shape[0])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([GRID_HEADER] + [_fmt(t) for t in grid])
        for name, row in zip(ids, curves):
            w.writerow([name] + [_fmt(v) for v in row])


def write_dataset_csv(path, data: FunctionalDataset) -> None:
    write_curves_csv(path, data.grid, data.Y)


def write_labels_csv(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([LABEL_HEADER])
        for v in np.asarray(labels, dtype=int):
            w.writerow([int(v)])


def write_table_csv(path, rows: list[dict]) -> None:
    """Tidy table from a list of dicts sharing the same keys."""
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def to_jsonable(obj):
    """Convert numpy containers and scalars, mapping non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")


SCHEMA_DIR = Path(__file__).with_name("schemas")


def load_schema(name: str) -> dict:
    """One of ``fit``, ``replicate``, ``dic_scan`` or ``manifest``."""
    return json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text())
