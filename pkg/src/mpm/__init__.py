"""
MLS-MPM forward simulation: transfers, contact, the substep loop and the
rollout tape.
"""

from .contact import (
    AgentMotion,
    Container,
    RigidAgent,
    box_sdf,
    collide,
    coulomb_project,
    move_agent,
    quat_from_rotvec,
    quat_multiply,
    quat_to_matrix,
)
from .simulator import MPMSimulator, RolloutResult, prepare_scene
from .tape import MaterialTensors, RolloutTape, SimState
from .transfer import GridState, Stencil, build_stencil, check_interior, g2p, grid_update, p2g

__all__ = [
    'AgentMotion', 'Container', 'RigidAgent', 'box_sdf', 'collide', 'coulomb_project', 'move_agent',
    'quat_from_rotvec', 'quat_multiply', 'quat_to_matrix',
    'MPMSimulator', 'RolloutResult', 'prepare_scene',
    'MaterialTensors', 'RolloutTape', 'SimState',
    'GridState', 'Stencil', 'build_stencil', 'check_interior', 'g2p', 'grid_update', 'p2g',
]
