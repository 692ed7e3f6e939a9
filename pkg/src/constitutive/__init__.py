"""
Constitutive model for granular material.

Hencky-form elasticity evaluated on singular values, Drucker-Prager plastic
return, and the analytic Lame-constant derivatives of the resulting stress.
All operations are batched over leading tensor dimensions.
"""

from .common import DTYPE, as_tensor
from .elasticity import cauchy_stress, lame_from_material, piola_stress, plastic_deformation, svk_energy
from .param_grads import constitutive_param_grads
from .plasticity import PlasticCase, PlasticReturn, dp_project, friction_alpha
from .svd import SvdTriple, safe_svd

__all__ = [
    'DTYPE', 'as_tensor',
    'cauchy_stress', 'lame_from_material', 'piola_stress', 'plastic_deformation', 'svk_energy',
    'constitutive_param_grads',
    'PlasticCase', 'PlasticReturn', 'dp_project', 'friction_alpha',
    'SvdTriple', 'safe_svd',
]
