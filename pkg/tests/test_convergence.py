"""
End-to-end runs on the tiny scene: gradient growth without regularization,
synthetic system identification, skill optimization and the rounding
ablation. Each run takes minutes, so the whole module is marked integration.
"""

import math

import numpy as np
import pytest

from src.gradients import backward
from src.models.domain import (
    GradientRegularization,
    MaterialParams,
    OptimizerConfig,
    Rounding,
    SkillParams,
    TrajectoryKind,
)
from src.mpm import prepare_scene
from src.optimize import PHYSICS_BOUNDS_BOX, SKILL_BOUNDS_BOX, SysidScene, run_skill_opt, run_sysid, select_candidate
from src.scene.trajectories import generate_sysid_trajectory
from src.skill import demo_prior
from src.skill.mapping import skill_to_actions

pytestmark = pytest.mark.integration

HIDDEN_MATERIAL = MaterialParams(E=120000.0, nu=0.2, rho=1900.0, phi_f=19.0)
HIDDEN_SKILL = SkillParams(
    theta_displace=0.3, theta_rotate=-0.2, theta_insert_dist=0.4, theta_push_angle=0.1, theta_push_dist=0.2,
)


def assert_line_search_selection(record, config):
    """The chosen multiplier is the first candidate with the lowest finite loss"""
    for it in record.iterations:
        assert len(it.candidate_losses) == len(config.ls_multipliers)
        assert it.multiplier == config.ls_multipliers[select_candidate(it.candidate_losses)]


def assert_improves(record):
    initial = record.iterations[0]
    assert initial.train_loss > 0.0
    assert all(math.isfinite(it.train_loss) and math.isfinite(it.val_loss) for it in record.iterations)
    assert min(it.train_loss for it in record.iterations[1:]) < initial.train_loss
    assert record.best.val_loss <= initial.val_loss


@pytest.fixture
def skill_scene(small_scene, fast_sim, material):
    """Settled tiny scene and the surface dug by the hidden skill"""
    prepared = prepare_scene(small_scene, fast_sim, material)
    simulator, initial = prepared
    trajectory, _ = skill_to_actions(HIDDEN_SKILL, fast_sim)
    target = simulator.rollout(initial, trajectory, material).observation
    return prepared, target


class TestGradientGrowth:
    """Test adjoint magnitudes over a whole sysid motion with and without clipping"""

    def test_clipping_bounds_what_grows_unregularized(self, small_scene, fast_sim, material, reg_none, reg_clip):
        sysid_scene = SysidScene(small_scene, fast_sim)
        trajectory = generate_sysid_trajectory(TrajectoryKind.OPTIMIZATION, fast_sim.dt, fast_sim.v_l, fast_sim.v_w)
        rollout = sysid_scene.simulator.rollout(sysid_scene.initial_state(material), trajectory, material)
        point_grad = np.zeros((small_scene.observation.grid_res ** 2, 3))
        point_grad[:, 2] = 1.0
        substeps = len(trajectory) * fast_sim.n_sub

        free = backward(sysid_scene.simulator, rollout.tape, point_grad, reg_none)
        scales = free.trace.max_scale_by_substep()
        assert set(scales) == set(range(substeps))
        if free.nonfinite_count:
            assert free.first_nonfinite_substep is not None
        finite = np.array([value for value in scales.values() if math.isfinite(value)])

        # a bound below the peak of the unregularized pass
        threshold = float(10 ** np.median(finite))
        assert max(scales.values()) > math.log10(threshold)
        for reg in (GradientRegularization(mode='clip', clip_threshold=threshold), reg_clip):
            clipped = backward(sysid_scene.simulator, rollout.tape, point_grad, reg)
            assert clipped.trace.regularized_bound() <= reg.clip_threshold
            assert np.all(np.isfinite(clipped.param_grad))
            assert np.all(np.isfinite(clipped.action_grad))
            assert set(clipped.trace.max_scale_by_substep()) == set(range(substeps))


class TestSyntheticRecovery:
    """Test 20-iteration runs against targets generated by hidden parameters"""

    def test_sysid_from_midpoint(self, small_scene, fast_sim, reg_clip):
        sysid_scene = SysidScene(small_scene, fast_sim)
        initial = sysid_scene.initial_state(HIDDEN_MATERIAL)
        targets = [
            sysid_scene.simulator.rollout(
                initial, generate_sysid_trajectory(kind, fast_sim.dt, fast_sim.v_l, fast_sim.v_w), HIDDEN_MATERIAL,
            ).observation
            for kind in (TrajectoryKind.OPTIMIZATION, TrajectoryKind.VALIDATION)
        ]

        config = OptimizerConfig(iterations=20)
        record = run_sysid(
            *targets, MaterialParams.midpoint(), small_scene, fast_sim, config, reg_clip, sysid_scene=sysid_scene,
        )

        assert len(record.iterations) == 20
        assert all(PHYSICS_BOUNDS_BOX.contains(it.solution) for it in record.iterations)
        assert_line_search_selection(record, config)
        assert_improves(record)

    def test_skill_from_demo_prior(self, small_scene, fast_sim, material, reg_clip, skill_scene):
        prepared, target = skill_scene
        config = OptimizerConfig(iterations=20)
        record = run_skill_opt(
            target, demo_prior(target), material, small_scene, fast_sim, config, reg_clip, prepared=prepared,
        )

        assert len(record.iterations) == 20
        assert all(SKILL_BOUNDS_BOX.contains(it.solution) for it in record.iterations)
        assert_line_search_selection(record, config)
        assert_improves(record)
        assert record.metadata['hole_depth_error'] >= 0.0


class TestRoundingAblation:
    """Test rounded and unrounded step counts side by side"""

    def test_both_modes_complete(self, small_scene, fast_sim, material, reg_clip, skill_scene):
        prepared, target = skill_scene
        init = demo_prior(target)
        config = OptimizerConfig(iterations=20)

        records = {}
        for rounding in (Rounding.ROUNDED, Rounding.UNROUNDED):
            records[rounding] = run_skill_opt(
                target, init, material, small_scene, fast_sim, config, reg_clip, rounding=rounding,
                label=f"skill-{rounding.value}", prepared=prepared,
            )

        for rounding, record in records.items():
            assert record.rounding is rounding
            assert len(record.iterations) == 20
            assert record.iterations[0].solution == pytest.approx(init.as_array().tolist())
            assert_line_search_selection(record, config)
            assert record.best.val_loss <= record.iterations[0].val_loss
            assert all(math.isfinite(it.val_loss) for it in record.iterations)
