"""
Training and validation losses between a simulated and a target observation.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.models.domain import LossKind
from src.models.errors import ContractViolation
from src.scene.observation import SurfaceObservation

from .emd import emd, emd_grad
from .height_map import HeightMap, hmd, hmd_point_grad, rasterize_height_map

logger = logging.getLogger(__name__)


def _check_resolution(obs: SurfaceObservation, target: SurfaceObservation) -> None:
    if obs.grid_res != target.grid_res:
        raise ContractViolation(f"observation resolutions differ: {obs.grid_res} vs {target.grid_res}")


def rasterize_observation(obs: SurfaceObservation, r_p: float) -> HeightMap:
    return rasterize_height_map(obs.points, obs.grid_res, obs.extent, obs.center, r_p)


def validation_loss(obs: SurfaceObservation, target: SurfaceObservation, r_p: float = 2e-7) -> float:
    """(EMD + HMD) averaged over the grid_res^2 sampling resolution"""
    _check_resolution(obs, target)
    emd_value = emd(obs.points, target.points).value
    hmd_value = hmd(rasterize_observation(obs, r_p), rasterize_observation(target, r_p))
    return (emd_value + hmd_value) / obs.grid_res ** 2


@dataclass
class LossEvaluation:
    """Training loss, its gradient w.r.t. the observation points and the validation loss"""
    loss: float
    point_grad: np.ndarray  # (grid_res^2, 3)
    validation: float


def evaluate_losses(
    obs: SurfaceObservation,
    target: SurfaceObservation,
    kind: LossKind = LossKind.HMD,
    r_p: float = 2e-7,
) -> LossEvaluation:
    _check_resolution(obs, target)
    kind = LossKind(kind)
    emd_result = emd(obs.points, target.points)
    height_map = rasterize_observation(obs, r_p)
    target_map = rasterize_observation(target, r_p)
    hmd_value = hmd(height_map, target_map)

    if kind is LossKind.EMD:
        loss = emd_result.value
        point_grad = emd_grad(obs.points, target.points, emd_result.assignment)
    else:
        loss = hmd_value
        point_grad = hmd_point_grad(height_map, target_map, len(obs.points))

    validation = (emd_result.value + hmd_value) / obs.grid_res ** 2
    logger.debug(f"{kind.value} loss {loss:.6f}, validation {validation:.6f}")
    return LossEvaluation(loss=loss, point_grad=point_grad, validation=validation)
