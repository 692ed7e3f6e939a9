"""Action trajectories: one 6D Cartesian displacement per global step."""

from dataclasses import dataclass, field

import numpy as np

ACTION_DIM = 6
ACTION_COLUMNS = ("dx", "dy", "dz", "da", "db", "dc")


@dataclass
class ActionTrajectory:
    """Ordered [dx, dy, dz, da, db, dc] displacements (m, rad), one row per global step"""
    actions: np.ndarray = field(default_factory=lambda: np.zeros((0, ACTION_DIM)))

    def __post_init__(self):
        actions = np.asarray(self.actions, dtype=np.float64)
        if actions.size == 0:
            actions = actions.reshape(0, ACTION_DIM)
        if actions.ndim != 2 or actions.shape[1] != ACTION_DIM:
            raise ValueError(f"actions must have shape (T, {ACTION_DIM}), got {actions.shape}")
        if not np.all(np.isfinite(actions)):
            raise ValueError("actions must be finite")
        self.actions = actions

    def __len__(self) -> int:
        return self.actions.shape[0]

    @property
    def net_displacement(self) -> np.ndarray:
        return self.actions.sum(axis=0)

    def concatenate(self, other: "ActionTrajectory") -> "ActionTrajectory":
        return ActionTrajectory(np.concatenate([self.actions, other.actions], axis=0))
