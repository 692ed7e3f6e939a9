"""
Point-cloud and trajectory file formats.

Point clouds are CSV (x,y,z per row, header optional) or ASCII PLY with an
``element vertex`` block holding x, y, z properties. Trajectories are CSV
waypoint lists ``t,dx,dy,dz,da,db,dc``.
"""

import csv
import logging
from pathlib import Path

import numpy as np

from src.models.errors import PointCloudFormatError
from src.models.trajectory import ACTION_COLUMNS, ActionTrajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


def _parse_row(values: list[str], width: int, row: int) -> list[float]:
    if len(values) != width:
        raise PointCloudFormatError(f"expected {width} columns, found {len(values)}", row=row)
    try:
        parsed = [float(value) for value in values]
    except ValueError:
        raise PointCloudFormatError(f"non-numeric value in {values}", row=row)
    if not all(np.isfinite(parsed)):
        raise PointCloudFormatError(f"non-finite value in {values}", row=row)
    return parsed


def _read_numeric_csv(path: Path, width: int) -> np.ndarray:
    rows = []
    with open(path, newline='') as f:
        for row_number, values in enumerate(csv.reader(f), start=1):
            values = [value.strip() for value in values]
            if not values or all(value == '' for value in values):
                continue
            if row_number == 1 and not _is_number(values[0]):
                continue  # header
            rows.append(_parse_row(values, width, row_number))
    return np.asarray(rows, dtype=np.float64).reshape(-1, width)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def read_point_cloud_csv(path: str | Path) -> np.ndarray:
    points = _read_numeric_csv(Path(path), 3)
    if points.shape[0] == 0:
        raise PointCloudFormatError(f"point cloud {path} has no points")
    return points


def write_point_cloud_csv(path: str | Path, points: np.ndarray) -> None:
    np.savetxt(path, np.asarray(points, dtype=np.float64).reshape(-1, 3), fmt=FLOAT_FORMAT,
               delimiter=",", header="x,y,z", comments="")


def read_point_cloud_ply(path: str | Path) -> np.ndarray:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PointCloudFormatError("missing 'ply' magic line", row=1)

    vertex_count = None
    properties: list[str] = []
    in_vertex = False
    header_end = None
    for row_number, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1:2] != ["ascii"]:
                raise PointCloudFormatError(f"only ascii PLY is supported, got {' '.join(tokens[1:])}", row=row_number)
        elif tokens[0] == "element":
            in_vertex = tokens[1] == "vertex"
            if in_vertex:
                vertex_count = int(tokens[2])
        elif tokens[0] == "property" and in_vertex:
            properties.append(tokens[-1])
        elif tokens[0] == "end_header":
            header_end = row_number
            break

    if header_end is None or vertex_count is None:
        raise PointCloudFormatError("PLY header has no vertex element or end_header")
    try:
        columns = [properties.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise PointCloudFormatError(f"vertex properties {properties} lack x, y or z")

    points = []
    for offset in range(vertex_count):
        row_number = header_end + 1 + offset
        if row_number > len(lines):
            raise PointCloudFormatError(f"expected {vertex_count} vertices, file ends early", row=row_number)
        values = lines[row_number - 1].split()
        parsed = _parse_row(values[:len(properties)], len(properties), row_number)
        points.append([parsed[c] for c in columns])
    if not points:
        raise PointCloudFormatError(f"point cloud {path} has no points")
    return np.asarray(points, dtype=np.float64)


def write_point_cloud_ply(path: str | Path, points: np.ndarray) -> None:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    header = "\n".join([
        "ply",
        "format ascii 1.0",
        f"element vertex {len(points)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ])
    np.savetxt(path, points, fmt=FLOAT_FORMAT, delimiter=" ", header=header, comments="")


def read_point_cloud(path: str | Path) -> np.ndarray:
    """Read a CSV or PLY point cloud, chosen by file suffix"""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ply":
        points = read_point_cloud_ply(path)
    elif suffix in (".csv", ".txt"):
        points = read_point_cloud_csv(path)
    else:
        raise PointCloudFormatError(f"unsupported point-cloud format: {path.suffix}")
    logger.info(f"Read {len(points)} points from {path}")
    return points


def write_point_cloud(path: str | Path, points: np.ndarray) -> None:
    if Path(path).suffix.lower() == ".ply":
        write_point_cloud_ply(path, points)
    else:
        write_point_cloud_csv(path, points)


def write_trajectory_csv(path: str | Path, trajectory: ActionTrajectory, dt: float) -> None:
    t = (np.arange(len(trajectory)) + 1) * dt
    data = np.column_stack([t, trajectory.actions]) if len(trajectory) else np.zeros((0, 7))
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",",
               header=",".join(("t",) + ACTION_COLUMNS), comments="")


def read_trajectory_csv(path: str | Path) -> ActionTrajectory:
    data = _read_numeric_csv(Path(path), 1 + len(ACTION_COLUMNS))
    if data.shape[0] and np.any(np.diff(data[:, 0]) <= 0):
        raise PointCloudFormatError(f"trajectory {path} timestamps are not increasing")
    return ActionTrajectory(data[:, 1:])
