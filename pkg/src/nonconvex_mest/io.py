"""Plain-text persistence: numeric CSV with an ``NA`` token, record tables, JSON."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

NA = "NA"


class DataFormatError(ValueError):
    pass


def fmt(x) -> str:
    """Round-trippable text for one cell; the same value always gives the same bytes."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return NA
        return repr(x)
    if x is None:
        return NA
    return str(x)


def read_matrix(path) -> np.ndarray:
    """Comma-separated numeric rows; ``NA`` cells become ``NaN``."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([np.nan if c.strip() == NA else float(c) for c in row])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataFormatError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.array(rows, dtype=float)


def read_vector(path) -> np.ndarray:
    M = read_matrix(path)
    if M.shape[1] != 1 and M.shape[0] != 1:
        raise DataFormatError(f"{path}: expected one value per line, got shape {M.shape}")
    return M.ravel()


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([fmt(v) for v in row])


def write_vector(path, v) -> None:
    write_matrix(path, np.asarray(v, dtype=float).reshape(-1, 1))


def write_table(path, columns, rows) -> None:
    """Header plus rows; each row is a mapping or a sequence aligned with ``columns``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            vals = [row.get(c) for c in columns] if isinstance(row, dict) else list(row)
            w.writerow([fmt(v) for v in vals])


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_trace(path, trace) -> None:
    write_table(path, ["iter", "objective", "opt_error", "stat_error", "eta", "projected_flag"], trace)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else x
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and not isinstance(obj, (str, int, bool)):
        return obj.value
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
