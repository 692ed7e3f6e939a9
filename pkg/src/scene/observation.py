"""
Surface observation: the highest point per cell of a square horizontal grid.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch

from src.models.domain import ObservationConfig
from src.models.errors import ContractViolation

logger = logging.getLogger(__name__)


@dataclass
class SurfaceObservation:
    """One point per grid cell, ordered by flat cell index iy * grid_res + ix"""
    points: np.ndarray  # (grid_res^2, 3)
    source_index: np.ndarray  # index into the observed point set, -1 for empty cells
    grid_res: int
    extent: float
    center: tuple[float, float]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.source_index = np.asarray(self.source_index, dtype=np.int64)
        if self.points.shape != (self.grid_res ** 2, 3):
            raise ContractViolation(
                f"observation needs {self.grid_res ** 2} points, got array of shape {self.points.shape}"
            )

    @property
    def cell_size(self) -> float:
        return self.extent / self.grid_res

    @property
    def empty_cells(self) -> int:
        return int(np.count_nonzero(self.source_index < 0))

    def cell_centers(self) -> np.ndarray:
        return cell_centers(self.grid_res, self.extent, self.center)


def cell_centers(grid_res: int, extent: float, center) -> np.ndarray:
    """(grid_res^2, 2) cell centers in flat-index order"""
    cell = extent / grid_res
    offsets = (np.arange(grid_res) + 0.5) * cell - extent / 2
    cy, cx = np.meshgrid(offsets + center[1], offsets + center[0], indexing='ij')
    return np.stack([cx.ravel(), cy.ravel()], axis=1)


def _as_points(points) -> np.ndarray:
    if isinstance(points, torch.Tensor):
        points = points.detach().cpu().numpy()
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ContractViolation(f"point set must have shape (N, 3), got {points.shape}")
    return points


def surface_observation(
    points,
    grid_res: int = 40,
    extent: float = 0.24,
    center=(0.0, 0.0),
    floor_height: float = 0.0,
) -> SurfaceObservation:
    """
    Select the highest point of every cell of a grid_res x grid_res grid.

    Points outside the grid are ignored. Cells that receive no point report
    their center at the floor height. Equal heights resolve to the lowest
    point index.
    """
    points = _as_points(points)
    if points.shape[0] == 0:
        raise ContractViolation("cannot observe an empty point set")

    cell = extent / grid_res
    origin = np.array([center[0] - extent / 2, center[1] - extent / 2])
    ij = np.floor((points[:, :2] - origin) / cell).astype(np.int64)
    inside = np.all((ij >= 0) & (ij < grid_res), axis=1)
    candidates = np.nonzero(inside)[0]
    flat = ij[candidates, 1] * grid_res + ij[candidates, 0]

    # highest first, lowest index on ties
    order = np.lexsort((candidates, -points[candidates, 2], flat))
    flat_sorted = flat[order]
    cells, first = np.unique(flat_sorted, return_index=True)
    winners = candidates[order[first]]

    source_index = np.full(grid_res ** 2, -1, dtype=np.int64)
    source_index[cells] = winners

    observed = np.empty((grid_res ** 2, 3))
    observed[:, :2] = cell_centers(grid_res, extent, center)
    observed[:, 2] = floor_height
    observed[cells] = points[winners]

    empty = grid_res ** 2 - len(cells)
    if empty:
        logger.debug(f"{empty} observation cells empty, filled at floor height {floor_height}")
    return SurfaceObservation(
        points=observed,
        source_index=source_index,
        grid_res=grid_res,
        extent=extent,
        center=(float(center[0]), float(center[1])),
    )


def observe(points, config: ObservationConfig, floor_height: float = 0.0) -> SurfaceObservation:
    return surface_observation(points, config.grid_res, config.extent, config.center, floor_height)
