"""Demonstration prior: a digging skill aimed at the deepest target point."""

import logging

import numpy as np

from src.models.domain import SkillParams
from src.models.errors import ContractViolation
from src.scene.observation import SurfaceObservation

from .mapping import DISPLACE_RANGE

logger = logging.getLogger(__name__)

# x offset of the shovel tip from the hole center at the end of phase 1
DEMO_X_OFFSET = 0.02
DEMO_CONSTANTS = {
    "theta_rotate": 0.2,
    "theta_insert_dist": 0.8,
    "theta_push_angle": 0.0,
    "theta_push_dist": -0.5,
}


def demo_prior(target: SurfaceObservation) -> SkillParams:
    """Skill parameters that start digging at the x position of the lowest target point"""
    points = target.points
    if points.shape[0] == 0:
        raise ContractViolation("demonstration prior needs a non-empty target")
    # cells filled at the floor are not measurements
    measured = points[target.source_index >= 0] if np.any(target.source_index >= 0) else points
    lowest = measured[np.argmin(measured[:, 2])]
    theta_displace = float(np.clip((lowest[0] - DEMO_X_OFFSET) / DISPLACE_RANGE, -1.0, 1.0))
    logger.info(f"Demonstration prior: lowest target point at x={lowest[0]:.4f}, theta_displace={theta_displace:.3f}")
    return SkillParams(theta_displace=theta_displace, **DEMO_CONSTANTS)
