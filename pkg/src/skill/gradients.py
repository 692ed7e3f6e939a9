"""
Closed-form derivatives of the summed action displacement with respect to the
skill parameters.

The summed displacement adds every action entry of the trajectory. These
scalar forms act as a reference for the per-step Jacobian in
``src.skill.mapping``, which is what the optimizers consume.
"""

import logging
import math

import numpy as np

from src.models.domain import Rounding, SimConfig, SkillParams
from src.models.errors import ContractViolation

from .mapping import DISPLACE_RANGE, INSERT_SCALE, PUSH_SCALE, ROTATE_RANGE, PhasePlan

logger = logging.getLogger(__name__)


def action_sum(plan: PhasePlan) -> float:
    """Sum of all action entries produced by a plan"""
    return (
        plan.T1 * (plan.dx1 + plan.drx1)
        + plan.T2 * (plan.dx2 + plan.dz2)
        + plan.T3 * (plan.dx3 + plan.dz3)
        + plan.T4 * (plan.drx4 + plan.dz4)
    )


def _phase_two_rotate(plan: PhasePlan) -> float:
    if plan.T2 == 0:
        return 0.0
    return -plan.d2 * ROTATE_RANGE * (math.sin(plan.phi2) + math.cos(plan.phi2))


def _rounded(plan: PhasePlan) -> np.ndarray:
    grad = np.zeros(5)
    if plan.T1 > 0:
        grad[0] = DISPLACE_RANGE
        grad[1] += ROTATE_RANGE
    grad[1] += _phase_two_rotate(plan)
    if plan.T4 > 0:
        grad[1] -= ROTATE_RANGE
    if plan.T2 > 0:
        grad[2] = INSERT_SCALE * (math.cos(plan.phi2) - math.sin(plan.phi2))
    if plan.T3 > 0:
        grad[3] = plan.d3 * ROTATE_RANGE * (math.cos(plan.phi3) - math.sin(plan.phi3))
        grad[4] = PUSH_SCALE * (math.cos(plan.phi3) + math.sin(plan.phi3))
    return grad


def _unrounded(plan: PhasePlan, config: SimConfig) -> np.ndarray:
    linear_step = config.v_l * config.dt
    angular_step = config.v_w * config.dt
    grad = _rounded(plan)
    grad[0] = 0.0
    grad[1] = _phase_two_rotate(plan)

    if plan.T1 > 0:
        if plan.t_d1 >= plan.t_phi1:
            # translation dominates: the x step is +-v_l dt, the rotation step shrinks with |d1|
            sign = math.copysign(1.0, plan.d1)
            grad[0] = -plan.T1 * plan.phi1 * linear_step * DISPLACE_RANGE * sign / plan.d1 ** 2
            grad[1] += plan.T1 * ROTATE_RANGE * linear_step / abs(plan.d1)
        else:
            sign = math.copysign(1.0, plan.phi1)
            grad[0] = plan.T1 * DISPLACE_RANGE * angular_step / abs(plan.phi1)
            grad[1] += -plan.T1 * plan.d1 * angular_step * ROTATE_RANGE * sign / plan.phi1 ** 2

    if plan.T4 > 0:
        if plan.t_phi1 >= plan.t_d4 and plan.phi1 != 0:
            sign = math.copysign(1.0, plan.phi1)
            grad[1] += -plan.T4 * plan.d4 * angular_step * ROTATE_RANGE * sign / plan.phi1 ** 2
        else:
            grad[1] += -plan.T4 * ROTATE_RANGE / plan.t_d4
    return grad


def skill_gradient(theta: SkillParams, plan: PhasePlan, rounding: Rounding, config: SimConfig | None = None) -> np.ndarray:
    """
    d(summed action displacement)/d theta for the five skill parameters.

    Args:
        theta: Skill parameters the plan was computed from
        plan: Output of ``plan_skill``/``skill_to_actions``
        rounding: Must match the plan's rounding mode
        config: Simulation settings; needed in unrounded mode

    Returns:
        Gradient ordered like ``SKILL_PARAM_NAMES``
    """
    rounding = Rounding(rounding)
    if rounding is not plan.rounding:
        raise ContractViolation(f"plan was built with {plan.rounding.value} step counts, gradient requested for {rounding.value}")
    expected_phi1 = theta.theta_rotate * ROTATE_RANGE
    if not math.isclose(plan.phi1, expected_phi1, rel_tol=0.0, abs_tol=1e-12):
        raise ContractViolation("plan does not belong to the given skill parameters")
    if rounding is Rounding.ROUNDED:
        return _rounded(plan)
    if config is None:
        raise ContractViolation("unrounded skill gradients need the simulation settings")
    return _unrounded(plan, config)
