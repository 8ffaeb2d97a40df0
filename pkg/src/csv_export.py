import os
import csv
import logging
from typing import Iterable, List, Sequence

import numpy as np

from mode_dynamics import Trajectory

logger = logging.getLogger(__name__)


def write_table(path: str, columns: Sequence[str], rows: Iterable[Sequence], header_lines: Sequence[str] = ()) -> str:
    """Comma-separated table preceded by '#' comment lines; no timestamps so reruns are byte-identical"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as handle:
        for line in header_lines:
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    if value is None:
        return ""
    return value


def read_table(path: str) -> List[List[str]]:
    """Rows of a table written by write_table, header row first, comment lines dropped"""
    with open(path, newline="") as handle:
        return [row for row in csv.reader(line for line in handle if not line.startswith("#"))]


def trajectory_columns(n_modes: int) -> List[str]:
    columns = ["t"]
    columns += [f"{part}_q_{n}" for n in range(1, n_modes + 1) for part in ("re", "im")]
    columns += [f"{part}_u_{n}" for n in range(1, n_modes + 1) for part in ("re", "im")]
    return columns


def trajectory_rows(trajectory: Trajectory, stride: int = 1) -> List[List[float]]:
    """Decimated rows; multi-column trajectories are summed, which by linearity is the all-in-modes run"""
    q, u = trajectory.q, trajectory.u
    if q.ndim == 3:
        q, u = q.sum(axis=1), u.sum(axis=1)
    rows = []
    for i in range(0, trajectory.n_samples, stride):
        row = [float(trajectory.times[i])]
        for n in range(q.shape[1]):
            row += [float(q[i, n].real), float(q[i, n].imag)]
        for n in range(u.shape[1]):
            row += [float(u[i, n].real), float(u[i, n].imag)]
        rows.append(row)
    return rows
