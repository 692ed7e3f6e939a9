"""
Loss landscape scans over one or two parameters with finite-difference gradients.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from src.models.errors import ConfigError, ContractViolation, SimulationDivergedError

logger = logging.getLogger(__name__)

# grid resolutions used for physics pairs and single skill parameters
PHYSICS_PAIR_STEPS = 50
SKILL_SINGLE_STEPS = 100


@dataclass(frozen=True)
class ScanAxis:
    name: str
    low: float
    high: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.low, self.high, self.steps)

    @property
    def spacing(self) -> float:
        return (self.high - self.low) / (self.steps - 1)


@dataclass
class LandscapeGrid:
    axes: list[ScanAxis]
    loss: np.ndarray  # one entry per grid point, indexed (i[, j])
    gradient: np.ndarray  # loss.shape + (n_axes,)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.loss.shape

    def rows(self) -> np.ndarray:
        """One row per grid point: axis values, loss, gradient components"""
        mesh = np.meshgrid(*[axis.values() for axis in self.axes], indexing='ij')
        columns = [m.ravel() for m in mesh] + [self.loss.ravel()]
        columns += [self.gradient[..., k].ravel() for k in range(len(self.axes))]
        return np.column_stack(columns)

    def header(self) -> list[str]:
        names = [axis.name for axis in self.axes]
        return names + ['loss'] + [f'd_loss_d_{name}' for name in names]


def finite_difference_gradient(loss: np.ndarray, spacings: list[float]) -> np.ndarray:
    """Central differences inside, one-sided differences at the boundaries"""
    grads = np.gradient(loss, *spacings, edge_order=1)
    if loss.ndim == 1:
        grads = [grads]
    return np.stack(grads, axis=-1)


def centralize(loss: np.ndarray) -> np.ndarray:
    return loss - np.nanmean(loss)


def normalize(gradient: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(gradient, axis=-1, keepdims=True)
    return np.divide(gradient, norm, out=np.zeros_like(gradient), where=norm > 0)


def landscape_scan(
    axes: list[ScanAxis],
    objective: Callable[[dict[str, float]], float],
    centralize_loss: bool = False,
    normalize_gradient: bool = False,
    progress_every: Optional[int] = None,
) -> LandscapeGrid:
    """
    Evaluate ``objective`` on a regular grid and estimate its gradient.

    Args:
        axes: One or two scanned parameters with their ranges
        objective: Loss for a mapping from axis name to value; the caller binds
            the fixed values, the loss kind and the scene
        centralize_loss: Subtract the mean loss before returning
        normalize_gradient: Rescale every gradient vector to unit length
        progress_every: Log progress every this many evaluations

    Returns:
        Loss and gradient estimates on the grid
    """
    if not 1 <= len(axes) <= 2:
        raise ContractViolation(f"a scan takes one or two axes, got {len(axes)}")
    for axis in axes:
        if axis.steps < 3:
            raise ContractViolation(f"axis {axis.name} needs at least 3 steps, got {axis.steps}")
        if not axis.high > axis.low:
            raise ContractViolation(f"axis {axis.name} has an empty range [{axis.low}, {axis.high}]")

    shape = tuple(axis.steps for axis in axes)
    loss = np.full(shape, np.nan)
    grids = [axis.values() for axis in axes]
    total = int(np.prod(shape))
    progress_every = progress_every or max(1, total // 10)

    for n, index in enumerate(np.ndindex(*shape)):
        point = {axis.name: float(grids[k][i]) for k, (axis, i) in enumerate(zip(axes, index))}
        try:
            loss[index] = float(objective(point))
        except SimulationDivergedError as e:
            logger.warning(f"Landscape point {point} diverged: {e}")
        if (n + 1) % progress_every == 0:
            logger.info(f"Landscape scan {n + 1}/{total}")

    nonfinite = int(np.sum(~np.isfinite(loss)))
    if nonfinite:
        logger.warning(f"{nonfinite} of {total} landscape points have no finite loss")

    gradient = finite_difference_gradient(loss, [axis.spacing for axis in axes])
    if centralize_loss:
        loss = centralize(loss)
    if normalize_gradient:
        gradient = normalize(gradient)
    return LandscapeGrid(axes=list(axes), loss=loss, gradient=gradient)


def write_landscape_csv(path: str | Path, grid: LandscapeGrid) -> None:
    np.savetxt(path, grid.rows(), fmt='%.12g', delimiter=',', header=','.join(grid.header()), comments='')


def default_steps(names: list[str], skill: bool) -> int:
    if skill and len(names) == 1:
        return SKILL_SINGLE_STEPS
    return PHYSICS_PAIR_STEPS


def parse_axis(text: str, default_steps_count: int) -> ScanAxis:
    """``name:low:high[:steps]``"""
    parts = text.split(':')
    if len(parts) not in (3, 4):
        raise ConfigError(f"axis '{text}' must look like name:low:high[:steps]")
    try:
        low, high = float(parts[1]), float(parts[2])
        steps = int(parts[3]) if len(parts) == 4 else default_steps_count
    except ValueError:
        raise ConfigError(f"axis '{text}' has a non-numeric range or step count")
    if not (math.isfinite(low) and math.isfinite(high)):
        raise ConfigError(f"axis '{text}' has a non-finite range")
    return ScanAxis(parts[0], low, high, steps)
