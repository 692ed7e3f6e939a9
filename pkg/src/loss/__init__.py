"""
Point-cloud losses: Earth Mover's distance, height-map rasterization and
distance, and the combined validation loss.
"""

from .emd import EmdResult, emd, emd_grad
from .height_map import (
    HeightMap,
    HoleStatistics,
    hmd,
    hmd_grad,
    hmd_point_grad,
    hole_statistics,
    rasterize_height_map,
    write_height_map_csv,
    write_height_map_pgm,
)
from .validation import LossEvaluation, evaluate_losses, rasterize_observation, validation_loss

__all__ = [
    'EmdResult', 'emd', 'emd_grad',
    'HeightMap', 'HoleStatistics', 'hmd', 'hmd_grad', 'hmd_point_grad', 'hole_statistics',
    'rasterize_height_map', 'write_height_map_csv', 'write_height_map_pgm',
    'LossEvaluation', 'evaluate_losses', 'rasterize_observation', 'validation_loss',
]
