"""
Skill-to-action mapping for the four-phase digging skill.

Phase 1 moves along world x and tilts the shovel, phase 2 inserts it along its
pointing direction, phase 3 pushes towards an angle and phase 4 rotates back
while lifting. Each phase emits a constant per-step displacement for an
integer number of global steps.
"""

import math
from dataclasses import dataclass

import numpy as np

from src.models.domain import Rounding, SimConfig, SkillParams
from src.models.trajectory import ACTION_DIM, ActionTrajectory

# displacement ranges of the skill parameters
DISPLACE_RANGE = 0.12
ROTATE_RANGE = math.pi / 3
INSERT_SCALE = 0.03
PUSH_SCALE = 0.1
PUSH_OFFSET = 0.04

# action indices written by the skill
IX, IZ, IRX = 0, 2, 3


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


@dataclass
class PhasePlan:
    """Step counts, per-step displacements and intermediates of one skill evaluation"""
    rounding: Rounding
    d1: float
    d2: float
    d3: float
    d4: float
    phi1: float
    phi2: float
    phi3: float
    t_d1: float
    t_phi1: float
    t_d4: float
    t1_float: float
    t2_float: float
    t3_float: float
    t4_float: float
    T1: int
    T2: int
    T3: int
    T4: int
    dx1: float
    drx1: float
    dx2: float
    dz2: float
    dx3: float
    dz3: float
    drx4: float
    dz4: float

    @property
    def total(self) -> int:
        return self.T1 + self.T2 + self.T3 + self.T4

    def phase_slices(self) -> list[slice]:
        edges = np.cumsum([0, self.T1, self.T2, self.T3, self.T4])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def _per_step(total: float, steps: int) -> float:
    return total / steps if steps > 0 else 0.0


def plan_skill(theta: SkillParams, config: SimConfig, rounding: Rounding = Rounding.ROUNDED) -> PhasePlan:
    rounding = Rounding(rounding)
    linear_step = config.v_l * config.dt
    angular_step = config.v_w * config.dt

    d1 = theta.theta_displace * DISPLACE_RANGE
    phi1 = theta.theta_rotate * ROTATE_RANGE
    t_d1 = abs(d1 / linear_step)
    t_phi1 = abs(phi1 / angular_step)
    t1_float = max(t_d1, t_phi1)
    T1 = round_half_up(t1_float)

    d2 = (theta.theta_insert_dist + 1) * INSERT_SCALE
    phi2 = phi1 + math.pi / 2
    t2_float = d2 / linear_step
    T2 = round_half_up(t2_float)

    d3 = (theta.theta_push_dist + 1) * PUSH_SCALE + PUSH_OFFSET
    phi3 = (theta.theta_push_angle + 3) * math.pi / 3
    t3_float = abs(d3 / linear_step)
    T3 = round_half_up(t3_float)

    d4 = config.d_lift
    t_d4 = d4 / linear_step
    t4_float = max(t_phi1, t_d4)
    T4 = round_half_up(t4_float)

    if rounding is Rounding.UNROUNDED:
        # phases 2 and 3 keep integer divisors so their distances stay differentiable
        div1 = t1_float if T1 > 0 else 0
        div4 = t4_float if T4 > 0 else 0
    else:
        div1, div4 = T1, T4

    return PhasePlan(
        rounding=rounding,
        d1=d1, d2=d2, d3=d3, d4=d4, phi1=phi1, phi2=phi2, phi3=phi3,
        t_d1=t_d1, t_phi1=t_phi1, t_d4=t_d4,
        t1_float=t1_float, t2_float=t2_float, t3_float=t3_float, t4_float=t4_float,
        T1=T1, T2=T2, T3=T3, T4=T4,
        dx1=_per_step(d1, div1), drx1=_per_step(phi1, div1),
        dx2=_per_step(d2 * math.cos(phi2), T2), dz2=_per_step(-d2 * math.sin(phi2), T2),
        dx3=_per_step(d3 * math.cos(phi3), T3), dz3=_per_step(d3 * math.sin(phi3), T3),
        drx4=_per_step(-phi1, div4), dz4=_per_step(d4, div4),
    )


def skill_to_actions(
    theta: SkillParams,
    config: SimConfig,
    rounding: Rounding = Rounding.ROUNDED,
) -> tuple[ActionTrajectory, PhasePlan]:
    plan = plan_skill(theta, config, rounding)
    actions = np.zeros((plan.total, ACTION_DIM))
    p1, p2, p3, p4 = plan.phase_slices()
    actions[p1, IX] = plan.dx1
    actions[p1, IRX] = plan.drx1
    actions[p2, IX] = plan.dx2
    actions[p2, IZ] = plan.dz2
    actions[p3, IX] = plan.dx3
    actions[p3, IZ] = plan.dz3
    actions[p4, IRX] = plan.drx4
    actions[p4, IZ] = plan.dz4
    return ActionTrajectory(actions), plan


def _dominant_duration_grads(plan: PhasePlan, config: SimConfig) -> tuple[float, float, float]:
    """d t1_float/d theta_displace, d t1_float/d theta_rotate, d t4_float/d theta_rotate"""
    linear_step = config.v_l * config.dt
    angular_step = config.v_w * config.dt
    dt1_ddisp = dt1_drot = dt4_drot = 0.0
    # ties resolve to the translation in phase 1 and to the rotation in phase 4
    if plan.t_d1 >= plan.t_phi1:
        dt1_ddisp = math.copysign(DISPLACE_RANGE / linear_step, plan.d1) if plan.d1 != 0 else 0.0
    else:
        dt1_drot = math.copysign(ROTATE_RANGE / angular_step, plan.phi1)
    if plan.t_phi1 >= plan.t_d4 and plan.phi1 != 0:
        dt4_drot = math.copysign(ROTATE_RANGE / angular_step, plan.phi1)
    return dt1_ddisp, dt1_drot, dt4_drot


def action_jacobian(plan: PhasePlan, config: SimConfig) -> np.ndarray:
    """d actions / d theta as a (T, 6, 5) array, constant within each phase"""
    jac = np.zeros((plan.total, ACTION_DIM, 5))
    p1, p2, p3, p4 = plan.phase_slices()
    unrounded = plan.rounding is Rounding.UNROUNDED

    if plan.T1 > 0:
        if unrounded:
            t1 = plan.t1_float
            dt_ddisp, dt_drot, _ = _dominant_duration_grads(plan, config)
            jac[p1, IX, 0] = DISPLACE_RANGE / t1 - plan.d1 / t1 ** 2 * dt_ddisp
            jac[p1, IX, 1] = -plan.d1 / t1 ** 2 * dt_drot
            jac[p1, IRX, 0] = -plan.phi1 / t1 ** 2 * dt_ddisp
            jac[p1, IRX, 1] = ROTATE_RANGE / t1 - plan.phi1 / t1 ** 2 * dt_drot
        else:
            jac[p1, IX, 0] = DISPLACE_RANGE / plan.T1
            jac[p1, IRX, 1] = ROTATE_RANGE / plan.T1

    if plan.T2 > 0:
        c2, s2 = math.cos(plan.phi2), math.sin(plan.phi2)
        jac[p2, IX, 1] = -plan.d2 * s2 * ROTATE_RANGE / plan.T2
        jac[p2, IZ, 1] = -plan.d2 * c2 * ROTATE_RANGE / plan.T2
        jac[p2, IX, 2] = INSERT_SCALE * c2 / plan.T2
        jac[p2, IZ, 2] = -INSERT_SCALE * s2 / plan.T2

    if plan.T3 > 0:
        c3, s3 = math.cos(plan.phi3), math.sin(plan.phi3)
        jac[p3, IX, 3] = -plan.d3 * s3 * ROTATE_RANGE / plan.T3
        jac[p3, IZ, 3] = plan.d3 * c3 * ROTATE_RANGE / plan.T3
        jac[p3, IX, 4] = PUSH_SCALE * c3 / plan.T3
        jac[p3, IZ, 4] = PUSH_SCALE * s3 / plan.T3

    if plan.T4 > 0:
        if unrounded:
            t4 = plan.t4_float
            _, _, dt4_drot = _dominant_duration_grads(plan, config)
            jac[p4, IRX, 1] = -ROTATE_RANGE / t4 + plan.phi1 / t4 ** 2 * dt4_drot
            jac[p4, IZ, 1] = -plan.d4 / t4 ** 2 * dt4_drot
        else:
            jac[p4, IRX, 1] = -ROTATE_RANGE / plan.T4
    return jac


def compose_skill_gradient(action_grad: np.ndarray, jacobian: np.ndarray) -> np.ndarray:
    """dL/dtheta from dL/dactions (T, 6) and the (T, 6, 5) action Jacobian"""
    action_grad = np.asarray(action_grad, dtype=np.float64)
    if action_grad.shape != jacobian.shape[:2]:
        raise ValueError(f"action gradient shape {action_grad.shape} does not match {jacobian.shape[:2]}")
    return np.einsum('tk,tkp->p', action_grad, jacobian)
