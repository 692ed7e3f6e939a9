"""
Height-map rasterization, the height-map distance and crater statistics.

Each point is splatted at its own (x, y) and at four offsets of r_p along
the horizontal axes. A pixel keeps the largest height it receives and
remembers which point supplied it, so pixel gradients can be routed back to
that point's z.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.models.errors import ContractViolation

logger = logging.getLogger(__name__)

SPLAT_OFFSETS = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
# PGM export: counts per meter of height
PGM_Z_SCALE = 100000.0


@dataclass
class HeightMap:
    """Pixel heights indexed [iy, ix] with the point that supplied each pixel"""
    pixels: np.ndarray
    owner: np.ndarray  # -1 where no point rose above zero
    extent: float
    center: tuple[float, float]

    @property
    def grid_res(self) -> int:
        return self.pixels.shape[0]

    @property
    def cell_size(self) -> float:
        return self.extent / self.grid_res

    def pixel_center(self, ix: int, iy: int) -> tuple[float, float]:
        cell = self.cell_size
        return (
            self.center[0] - self.extent / 2 + (ix + 0.5) * cell,
            self.center[1] - self.extent / 2 + (iy + 0.5) * cell,
        )


def rasterize_height_map(points, grid_res: int, extent: float, center, r_p: float) -> HeightMap:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        raise ContractViolation("cannot rasterize an empty point set")

    cell = extent / grid_res
    origin = np.array([center[0] - extent / 2, center[1] - extent / 2])

    samples = points[None, :, :2] + r_p * SPLAT_OFFSETS[:, None, :]
    ij = np.floor((samples - origin) / cell).astype(np.int64).reshape(-1, 2)
    index = np.tile(np.arange(len(points)), len(SPLAT_OFFSETS))
    inside = np.all((ij >= 0) & (ij < grid_res), axis=1)
    ij, index = ij[inside], index[inside]
    flat = ij[:, 1] * grid_res + ij[:, 0]
    z = points[index, 2]

    # highest first, lowest index on ties
    order = np.lexsort((index, -z, flat))
    cells, first = np.unique(flat[order], return_index=True)
    winners = index[order[first]]
    heights = points[winners, 2]
    raised = heights > 0

    pixels = np.zeros(grid_res * grid_res)
    owner = np.full(grid_res * grid_res, -1, dtype=np.int64)
    pixels[cells[raised]] = heights[raised]
    owner[cells[raised]] = winners[raised]
    return HeightMap(
        pixels=pixels.reshape(grid_res, grid_res),
        owner=owner.reshape(grid_res, grid_res),
        extent=extent,
        center=(float(center[0]), float(center[1])),
    )


def _check_resolution(I: HeightMap, I_hat: HeightMap) -> None:
    if I.pixels.shape != I_hat.pixels.shape:
        raise ContractViolation(f"height-map resolutions differ: {I.pixels.shape} vs {I_hat.pixels.shape}")


def hmd(I: HeightMap, I_hat: HeightMap) -> float:
    """Summed absolute pixel difference"""
    _check_resolution(I, I_hat)
    return float(np.abs(I.pixels - I_hat.pixels).sum())


def hmd_grad(I: HeightMap, I_hat: HeightMap) -> np.ndarray:
    """d HMD / d I per pixel; zero at exact equality"""
    _check_resolution(I, I_hat)
    return np.sign(I.pixels - I_hat.pixels)


def hmd_point_grad(I: HeightMap, I_hat: HeightMap, n_points: int) -> np.ndarray:
    """d HMD / d points for the points I was rasterized from, (n_points, 3)"""
    pixel_grad = hmd_grad(I, I_hat).ravel()
    owner = I.owner.ravel()
    owned = owner >= 0
    grad = np.zeros((n_points, 3))
    np.add.at(grad[:, 2], owner[owned], pixel_grad[owned])
    return grad


@dataclass
class HoleStatistics:
    pixel: tuple[int, int]  # (ix, iy) of the deepest pixel
    center: tuple[float, float]  # metric (x, y) of that pixel
    depth: float  # below the reference height, m


def hole_statistics(height_map: HeightMap, reference_height: float) -> HoleStatistics:
    """Location and depth of the deepest pixel; the first one in row-major order on ties"""
    iy, ix = np.unravel_index(int(np.argmin(height_map.pixels)), height_map.pixels.shape)
    depth = float(reference_height - height_map.pixels[iy, ix])
    return HoleStatistics(pixel=(int(ix), int(iy)), center=height_map.pixel_center(ix, iy), depth=depth)


def write_height_map_csv(path: str | Path, height_map: HeightMap) -> None:
    """Row-major export, one row per iy"""
    np.savetxt(path, height_map.pixels, fmt="%.12g", delimiter=",")


def write_height_map_pgm(path: str | Path, height_map: HeightMap, z_scale: float = PGM_Z_SCALE) -> None:
    """16-bit binary PGM, value = round(z * z_scale) clipped to [0, 65535], row iy = 0 first"""
    values = np.clip(np.round(height_map.pixels * z_scale), 0, 65535).astype('>u2')
    rows, cols = values.shape
    header = f"P5\n# z_scale {z_scale:g} counts per meter\n{cols} {rows}\n65535\n"
    with open(path, 'wb') as f:
        f.write(header.encode('ascii'))
        f.write(values.tobytes())
    if np.any(height_map.pixels * z_scale > 65535):
        logger.warning(f"Height map {path} clipped at {65535 / z_scale:.4f} m")
