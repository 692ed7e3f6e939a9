"""
Reverse-mode gradients through rollouts and adjoint regularization.
"""

from .backward import (
    GradientResult,
    backward,
    backward_from_particles,
    observation_to_particle_grad,
    stress_gradient_mismatch,
)
from .regularize import VECTOR_DIMS, AdjointRegularizer, RegularizationStats, regularize
from .trace import GradientTrace, TraceRow

__all__ = [
    'GradientResult', 'backward', 'backward_from_particles', 'observation_to_particle_grad', 'stress_gradient_mismatch',
    'VECTOR_DIMS', 'AdjointRegularizer', 'RegularizationStats', 'regularize',
    'GradientTrace', 'TraceRow',
]
