"""
Tests for the digging skill: step counts, per-step actions, the action
Jacobian, the summed-displacement gradients and the demonstration prior.
"""

import math

import numpy as np
import pytest

from src.models.domain import Rounding, SimConfig, SkillParams
from src.models.errors import ContractViolation
from src.scene.observation import cell_centers, surface_observation
from src.skill import (
    action_jacobian,
    action_sum,
    compose_skill_gradient,
    demo_prior,
    plan_skill,
    round_half_up,
    skill_gradient,
    skill_to_actions,
)

DEMO_THETA = SkillParams.from_array([0.0, 0.2, 0.8, 0.0, -0.5])
OFF_AXIS_THETA = SkillParams.from_array([0.5, 0.1, 0.0, 0.2, 0.3])


@pytest.fixture
def sim_config():
    return SimConfig()


def finite_difference_jacobian(theta: SkillParams, config: SimConfig, rounding: Rounding, h: float = 1e-6):
    base = theta.as_array()
    columns = []
    for p in range(5):
        shift = np.zeros(5)
        shift[p] = h
        plus, _ = skill_to_actions(SkillParams.from_array(base + shift), config, rounding)
        minus, _ = skill_to_actions(SkillParams.from_array(base - shift), config, rounding)
        columns.append((plus.actions - minus.actions) / (2 * h))
    return np.stack(columns, axis=-1)


class TestPhasePlan:
    """Test step counts and per-step displacements"""

    def test_demo_step_counts(self, sim_config):
        plan = plan_skill(DEMO_THETA, sim_config)
        assert (plan.T1, plan.T2, plan.T3, plan.T4) == (42, 108, 180, 42)
        assert plan.total == 372

    def test_demo_phase_one_rotation(self, sim_config):
        plan = plan_skill(DEMO_THETA, sim_config)
        assert plan.dx1 == 0.0
        assert plan.drx1 == pytest.approx(4.9866e-3, rel=1e-4)

    def test_actions_follow_phases(self, sim_config):
        trajectory, plan = skill_to_actions(DEMO_THETA, sim_config)
        actions = trajectory.actions
        assert actions.shape == (372, 6)
        p1, p2, p3, p4 = plan.phase_slices()
        assert np.all(actions[p1, 3] == plan.drx1)
        assert np.all(actions[p2, 1] == 0.0)
        # phase 3 pushes along a direction set by the push angle
        assert np.allclose(actions[p3, 0].sum(), plan.d3 * math.cos(plan.phi3))
        # phase 4 undoes the phase 1 rotation and lifts by d_lift
        assert actions[p4, 3].sum() == pytest.approx(-plan.phi1)
        assert actions[p4, 2].sum() == pytest.approx(sim_config.d_lift)
        assert np.all(actions[:, [4, 5]] == 0.0)

    def test_zero_length_phase_one(self, sim_config):
        plan = plan_skill(SkillParams(theta_insert_dist=0.0), sim_config)
        assert plan.T1 == 0
        assert plan.dx1 == 0.0 and plan.drx1 == 0.0

    def test_round_half_up(self):
        assert round_half_up(41.5) == 42
        assert round_half_up(2.5) == 3
        assert round_half_up(2.4999) == 2
        assert round_half_up(0.0) == 0

    def test_unrounded_phase_one_uses_fractional_duration(self, sim_config):
        plan = plan_skill(DEMO_THETA, sim_config, Rounding.UNROUNDED)
        assert plan.drx1 == pytest.approx(plan.phi1 / plan.t1_float)
        assert plan.dx2 == pytest.approx(plan.d2 * math.cos(plan.phi2) / plan.T2)


class TestActionJacobian:
    """Test the per-step action Jacobian"""

    @pytest.mark.parametrize('theta', [DEMO_THETA, OFF_AXIS_THETA])
    @pytest.mark.parametrize('rounding', [Rounding.ROUNDED, Rounding.UNROUNDED])
    def test_against_finite_differences(self, sim_config, theta, rounding):
        _, plan = skill_to_actions(theta, sim_config, rounding)
        jacobian = action_jacobian(plan, sim_config)
        numeric = finite_difference_jacobian(theta, sim_config, rounding)
        assert jacobian.shape == (plan.total, 6, 5)
        assert np.allclose(jacobian, numeric, rtol=1e-5, atol=1e-8)

    @pytest.mark.parametrize('theta', [DEMO_THETA, OFF_AXIS_THETA])
    @pytest.mark.parametrize('rounding', [Rounding.ROUNDED, Rounding.UNROUNDED])
    def test_summed_jacobian_matches_closed_form(self, sim_config, theta, rounding):
        _, plan = skill_to_actions(theta, sim_config, rounding)
        jacobian = action_jacobian(plan, sim_config)
        closed_form = skill_gradient(theta, plan, rounding, sim_config)
        assert np.allclose(jacobian.sum(axis=(0, 1)), closed_form, rtol=1e-10, atol=1e-12)

    def test_action_sum_derivative(self, sim_config):
        """The closed form is the derivative of the summed action entries"""
        h = 1e-6
        _, plan = skill_to_actions(OFF_AXIS_THETA, sim_config)
        grad = skill_gradient(OFF_AXIS_THETA, plan, Rounding.ROUNDED)
        base = OFF_AXIS_THETA.as_array()
        for p in range(5):
            shift = np.zeros(5)
            shift[p] = h
            plus = action_sum(plan_skill(SkillParams.from_array(base + shift), sim_config))
            minus = action_sum(plan_skill(SkillParams.from_array(base - shift), sim_config))
            assert (plus - minus) / (2 * h) == pytest.approx(grad[p], rel=1e-5, abs=1e-8)

    def test_compose_skill_gradient(self, sim_config):
        _, plan = skill_to_actions(DEMO_THETA, sim_config)
        jacobian = action_jacobian(plan, sim_config)
        ones = np.ones((plan.total, 6))
        assert np.allclose(compose_skill_gradient(ones, jacobian), jacobian.sum(axis=(0, 1)))
        with pytest.raises(ValueError):
            compose_skill_gradient(np.ones((3, 6)), jacobian)


class TestSkillGradientContracts:
    """Test the preconditions of the closed-form gradient"""

    def test_rounding_mismatch(self, sim_config):
        _, plan = skill_to_actions(DEMO_THETA, sim_config, Rounding.ROUNDED)
        with pytest.raises(ContractViolation):
            skill_gradient(DEMO_THETA, plan, Rounding.UNROUNDED, sim_config)

    def test_foreign_plan(self, sim_config):
        _, plan = skill_to_actions(DEMO_THETA, sim_config)
        with pytest.raises(ContractViolation):
            skill_gradient(OFF_AXIS_THETA, plan, Rounding.ROUNDED)

    def test_unrounded_needs_config(self, sim_config):
        _, plan = skill_to_actions(DEMO_THETA, sim_config, Rounding.UNROUNDED)
        with pytest.raises(ContractViolation):
            skill_gradient(DEMO_THETA, plan, Rounding.UNROUNDED)


class TestDemoPrior:
    """Test the demonstration prior"""

    def test_lowest_point_sets_displacement(self):
        points = np.zeros((1600, 3))
        points[:, :2] = cell_centers(40, 0.24, (0.0, 0.0))
        points[:, 2] = 0.07
        points[20 * 40 + 31] = (0.0679, 0.003, 0.03)
        target = surface_observation(points, 40, 0.24)

        theta = demo_prior(target)
        assert theta.theta_displace == pytest.approx(0.399167, abs=1e-6)
        assert theta.as_array()[1:].tolist() == [0.2, 0.8, 0.0, -0.5]

    def test_empty_cells_are_ignored(self):
        """Cells without a measurement sit at the floor and must not win"""
        points = np.array([[0.05, 0.0, 0.05], [-0.05, 0.0, 0.06]])
        target = surface_observation(points, 8, 0.24)
        assert target.empty_cells == 62
        assert demo_prior(target).theta_displace == pytest.approx((0.05 - 0.02) / 0.12)

    def test_displacement_is_clipped(self):
        target = surface_observation(np.array([[-0.119, 0.0, 0.01]]), 4, 0.24)
        assert demo_prior(target).theta_displace == -1.0
