"""
Particle block initialization and the Lagrangian particle state.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy.stats import qmc

from src.constitutive.common import DTYPE
from src.models.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class ParticleSystem:
    """Per-particle position, velocity, deformation gradient and affine matrix"""
    x: torch.Tensor  # (N, 3) m
    v: torch.Tensor  # (N, 3) m/s
    F: torch.Tensor  # (N, 3, 3)
    C: torch.Tensor  # (N, 3, 3) 1/s
    volume: float  # per-particle rest volume, m^3
    r_p: float  # particle radius, m

    @property
    def count(self) -> int:
        return self.x.shape[0]

    def clone(self) -> "ParticleSystem":
        return ParticleSystem(
            x=self.x.detach().clone(),
            v=self.v.detach().clone(),
            F=self.F.detach().clone(),
            C=self.C.detach().clone(),
            volume=self.volume,
            r_p=self.r_p,
        )

    def positions(self) -> np.ndarray:
        return self.x.detach().cpu().numpy()

    def determinants(self) -> torch.Tensor:
        return torch.linalg.det(self.F.detach())


def block_particle_count(box_extent, fill_density: float) -> int:
    extent = np.asarray(box_extent, dtype=np.float64)
    return int(round(float(np.prod(extent)) * fill_density))


def init_particle_block(
    box_extent,
    fill_density: float,
    center: tuple[float, float] = (0.0, 0.0),
    floor_height: float = 0.0,
    seed: int = 0,
    scramble: bool = True,
) -> ParticleSystem:
    """
    Fill an axis-aligned box resting on the floor with particles at rest.

    Args:
        box_extent: Box size (x, y, z) in meters
        fill_density: Particles per cubic meter
        center: Horizontal center of the box
        floor_height: z of the box's bottom face
        seed: Seed of the scrambled Sobol sequence
        scramble: Owen scrambling of the sequence

    Returns:
        ParticleSystem with zero velocity, identity F and zero C
    """
    extent = np.asarray(box_extent, dtype=np.float64)
    if extent.shape != (3,) or np.any(extent <= 0):
        raise ConfigError(f"box extent must be three positive lengths, got {box_extent}")
    if not fill_density > 0:
        raise ConfigError(f"fill density must be positive, got {fill_density}")

    count = block_particle_count(extent, fill_density)
    if count == 0:
        raise ConfigError(f"box {tuple(extent)} at density {fill_density} holds no particles")

    sampler = qmc.Sobol(d=3, scramble=scramble, seed=seed)
    unit = sampler.random_base2(m=max(0, math.ceil(math.log2(count))))[:count]
    lower = np.array([center[0] - extent[0] / 2, center[1] - extent[1] / 2, floor_height])
    points = qmc.scale(unit, lower, lower + extent)

    volume = float(np.prod(extent)) / count
    r_p = volume ** (1.0 / 3.0) / 2
    logger.info(f"Initialized particle block {tuple(extent)} with {count} particles (r_p={r_p:.3e} m)")

    x = torch.as_tensor(points, dtype=DTYPE)
    return ParticleSystem(
        x=x,
        v=torch.zeros_like(x),
        F=torch.eye(3, dtype=DTYPE).repeat(count, 1, 1),
        C=torch.zeros(count, 3, 3, dtype=DTYPE),
        volume=volume,
        r_p=r_p,
    )
