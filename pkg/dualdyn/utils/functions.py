import os
import json
import logging
from typing import Any, Iterable, List, Optional

import numpy as np

from dualdyn.models.Dynamics import Trajectory

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


# --- Config value parsing ---

def parse_vector(text: str) -> List[float]:
    """'1, 2, 3' -> [1.0, 2.0, 3.0]"""
    items = [item.strip() for item in str(text).split(",")]
    if not items or any(item == "" for item in items):
        raise ValueError(f"malformed vector '{text}'")
    return [float(item) for item in items]


def parse_blocks(text: str) -> List[float]:
    """Per-player blocks separated by ';', flattened: '1,2;1,2' -> [1, 2, 1, 2]"""
    values: List[float] = []
    for block in str(text).split(";"):
        values.extend(parse_vector(block))
    return values


def parse_matrix(text: str) -> List[List[float]]:
    """Rows separated by ';': '1,0;0,4' -> [[1, 0], [0, 4]]"""
    rows = [parse_vector(row) for row in str(text).split(";")]
    if len({len(row) for row in rows}) != 1:
        raise ValueError(f"matrix rows have different lengths in '{text}'")
    return rows


# --- Artifacts ---

def to_jsonable(value: Any) -> Any:
    """Numpy-aware conversion; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_json(path: str, payload: Any) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, indent=2, allow_nan=False)
        f.write("\n")
    return path


def trajectory_columns(n: int, with_bound: bool) -> List[str]:
    columns = ["t"] + [f"x_{i}" for i in range(n)]
    if with_bound:
        columns += ["metric", "bound"]
    return columns


def write_trajectory_csv(path: str, traj: Trajectory, metric: Optional[Iterable[float]] = None,
                         bound: Optional[Iterable[float]] = None) -> str:
    """Columns t, x_0..x_{n-1} and, when a bound is configured, metric and bound."""
    with_bound = metric is not None and bound is not None
    columns = [traj.times[:, None], traj.x]
    if with_bound:
        columns += [np.asarray(metric, dtype=float)[:, None], np.asarray(bound, dtype=float)[:, None]]
    table = np.hstack(columns)
    header = ",".join(trajectory_columns(traj.x.shape[1], with_bound))

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.savetxt(path, table, fmt=CSV_FLOAT_FORMAT, delimiter=",", header=header, comments="")
    logger.debug("wrote %d rows to %s", table.shape[0], path)
    return path


def resolve_prefix(prefix: str, output_dir: str) -> str:
    """Relative prefixes live under ``output_dir``; the parent folder is created."""
    path = prefix if os.path.isabs(prefix) else os.path.join(output_dir, prefix)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return path
