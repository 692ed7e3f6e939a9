"""
Domain models shared by the simulation, loss and optimization packages.
"""

from .domain import (
    CheckpointMode,
    GradientRegularization,
    IterationRecord,
    LossKind,
    MaterialParams,
    ObservationConfig,
    OptimizerConfig,
    PHYSICS_BOUNDS,
    PHYSICS_PARAM_NAMES,
    RegMode,
    Rounding,
    RunManifest,
    RunRecord,
    SKILL_PARAM_NAMES,
    SceneConfig,
    ShovelConfig,
    SimConfig,
    SkillParams,
    TrajectoryKind,
    clamp_physics,
    physics_bounds_array,
)
from .trajectory import ACTION_COLUMNS, ACTION_DIM, ActionTrajectory
from .errors import (
    ConfigError,
    ContractViolation,
    GranularDigError,
    LineSearchDivergedError,
    OutOfDomainError,
    PointCloudFormatError,
    SimulationDivergedError,
)

__all__ = [
    'CheckpointMode', 'GradientRegularization', 'IterationRecord', 'LossKind',
    'MaterialParams', 'ObservationConfig', 'OptimizerConfig', 'PHYSICS_BOUNDS',
    'PHYSICS_PARAM_NAMES', 'RegMode', 'Rounding', 'RunManifest', 'RunRecord',
    'SKILL_PARAM_NAMES', 'SceneConfig', 'ShovelConfig', 'SimConfig', 'SkillParams',
    'TrajectoryKind', 'clamp_physics', 'physics_bounds_array',
    'ACTION_COLUMNS', 'ACTION_DIM', 'ActionTrajectory',
    'ConfigError', 'ContractViolation', 'GranularDigError', 'LineSearchDivergedError',
    'OutOfDomainError', 'PointCloudFormatError', 'SimulationDivergedError',
]
