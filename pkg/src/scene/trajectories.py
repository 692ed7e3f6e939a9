"""
The two fixed system-identification motions, as per-step action trajectories.
"""

import logging
import math

import numpy as np

from src.models.domain import TrajectoryKind
from src.models.errors import ConfigError
from src.models.trajectory import ACTION_DIM, ActionTrajectory

logger = logging.getLogger(__name__)

# (dx, dy, dz, da, db, dc) totals per segment; rotations are about the shovel's local axes
SYSID_SEGMENTS: dict[TrajectoryKind, list[tuple[float, ...]]] = {
    TrajectoryKind.OPTIMIZATION: [
        (0.09, 0.0, 0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, -0.05, 0.0, 0.0, 0.0),
        (-0.12, 0.0, 0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.12, 0.0, 0.0, 0.0),
    ],
    TrajectoryKind.VALIDATION: [
        # to the corner, then turn the blade face towards the opposite corner
        (-0.09, -0.09, 0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, 0.0, 0.0, math.pi / 4),
        (0.0, 0.0, -0.05, 0.0, 0.0, 0.0),
        (0.12, 0.12, 0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.12, 0.0, 0.0, 0.0),
    ],
}


def segment_steps(delta, dt: float, v_l: float, v_w: float) -> int:
    """Rounded step count of one segment at the end-effector speed limits, at least 1"""
    delta = np.asarray(delta, dtype=np.float64)
    linear = float(np.linalg.norm(delta[:3])) / (v_l * dt)
    angular = float(np.linalg.norm(delta[3:])) / (v_w * dt)
    return max(1, int(math.floor(max(linear, angular) + 0.5)))


def segments_to_actions(segments, dt: float, v_l: float, v_w: float) -> ActionTrajectory:
    blocks = []
    for delta in segments:
        steps = segment_steps(delta, dt, v_l, v_w)
        blocks.append(np.tile(np.asarray(delta, dtype=np.float64) / steps, (steps, 1)))
    if not blocks:
        return ActionTrajectory(np.zeros((0, ACTION_DIM)))
    return ActionTrajectory(np.concatenate(blocks, axis=0))


def generate_sysid_trajectory(kind, dt: float, v_l: float, v_w: float = 0.5) -> ActionTrajectory:
    try:
        kind = TrajectoryKind(kind)
    except ValueError:
        raise ConfigError(f"Unknown sysid trajectory kind: {kind}")
    if not (dt > 0 and v_l > 0 and v_w > 0):
        raise ConfigError(f"dt, v_l and v_w must be positive (dt={dt}, v_l={v_l}, v_w={v_w})")

    trajectory = segments_to_actions(SYSID_SEGMENTS[kind], dt, v_l, v_w)
    logger.debug(f"Generated {kind.value} sysid trajectory with {len(trajectory)} steps")
    return trajectory
