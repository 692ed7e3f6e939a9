"""
Four-phase digging skill: parameter-to-action mapping, its Jacobian, the
closed-form summed-displacement gradients and the demonstration prior.
"""

from .demo import demo_prior
from .gradients import action_sum, skill_gradient
from .mapping import PhasePlan, action_jacobian, compose_skill_gradient, plan_skill, round_half_up, skill_to_actions

__all__ = [
    'demo_prior', 'action_sum', 'skill_gradient',
    'PhasePlan', 'action_jacobian', 'compose_skill_gradient', 'plan_skill', 'round_half_up', 'skill_to_actions',
]
