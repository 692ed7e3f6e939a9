"""
Scene setup: particle block initialization, surface observation, the fixed
system-identification motions and point-cloud/trajectory file formats.
"""

from .io import (
    read_point_cloud,
    read_trajectory_csv,
    write_point_cloud,
    write_trajectory_csv,
)
from .observation import SurfaceObservation, cell_centers, observe, surface_observation
from .particles import ParticleSystem, block_particle_count, init_particle_block
from .trajectories import SYSID_SEGMENTS, generate_sysid_trajectory, segment_steps

__all__ = [
    'read_point_cloud', 'read_trajectory_csv', 'write_point_cloud', 'write_trajectory_csv',
    'SurfaceObservation', 'cell_centers', 'observe', 'surface_observation',
    'ParticleSystem', 'block_particle_count', 'init_particle_block',
    'SYSID_SEGMENTS', 'generate_sysid_trajectory', 'segment_steps',
]
