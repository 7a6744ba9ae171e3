"""Error metrics and deterministic report serialization.

Reports are plain nested dicts assembled by the CLI. Serialization is
byte-stable for identical inputs: keys are sorted, floats use repr, and
non-finite values become null (their meaning is carried by flags).
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np


def error_z(log_z_est: float, log_z_exact: float) -> float:
    """Primary partition-sum metric |log(Z_est / Z_exact)|."""
    if not (math.isfinite(log_z_est) and math.isfinite(log_z_exact)):
        raise ValueError("non-finite log partition value")
    return abs(log_z_est - log_z_exact)


def error_z_ratio(log_z_est: float, log_z_exact: float) -> float | None:
    """Literal ratio metric |log Z_est / log Z_exact|.

    Equals 1 at perfection, so it is secondary; None when the reference
    log Z is 0 and the ratio is undefined.
    """
    if not (math.isfinite(log_z_est) and math.isfinite(log_z_exact)):
        raise ValueError("non-finite log partition value")
    if log_z_exact == 0.0:
        return None
    return abs(log_z_est / log_z_exact)


def error_marginals(est, exact) -> float:
    """Largest absolute belief deviation over all variables and states."""
    a = np.asarray(est, dtype=np.float64)
    b = np.asarray(exact, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"marginal shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def z_error_section(log_z_est: float, log_z_exact: float) -> dict:
    """Both Z metrics with validity flagging for undefined estimates."""
    if not math.isfinite(log_z_est):
        return {"error_z": None, "error_z_ratio": None, "valid": False}
    return {
        "error_z": error_z(log_z_est, log_z_exact),
        "error_z_ratio": error_z_ratio(log_z_est, log_z_exact),
        "valid": True,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    # bool before int: bool is an int subclass
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def to_json(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, list):
        for p, v in enumerate(obj):
            _flatten(f"{prefix}.{p}", v, rows)
    else:
        rows.append((prefix, "" if obj is None else obj))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def to_csv(report: dict) -> str:
    """Flattened dot-path key,value rows; arrays get positional suffixes."""
    rows: list[tuple] = []
    _flatten("", _jsonable(report), rows)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["key", "value"])
    for k, v in rows:
        w.writerow([k, _cell(v)])
    return buf.getvalue()


def table_csv(rows: list[dict], columns: list[str]) -> str:
    """Uniform dict rows as a proper CSV table with a header."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(_jsonable(row.get(c))) for c in columns])
    return buf.getvalue()
