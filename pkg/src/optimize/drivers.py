"""
Experiment drivers: system identification, skill optimization and direct
trajectory optimization.

Every driver runs the same loop. Each iteration rolls out the current
solution, scores it against the target, back-propagates the training loss,
and takes a (line-search) RMSProp step. The iteration record holds the
solution that was scored together with its training and validation losses.
"""

import logging
import math
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from src.gradients.backward import GradientResult, backward
from src.gradients.trace import GradientTrace
from src.loss.height_map import hmd, hole_statistics
from src.loss.validation import evaluate_losses, rasterize_observation, validation_loss
from src.models.domain import (
    PHYSICS_PARAM_NAMES,
    SKILL_PARAM_NAMES,
    GradientRegularization,
    IterationRecord,
    LossKind,
    MaterialParams,
    OptimizerConfig,
    Rounding,
    RunRecord,
    SceneConfig,
    SimConfig,
    SkillParams,
    TrajectoryKind,
)
from src.models.errors import ConfigError, SimulationDivergedError
from src.models.trajectory import ACTION_COLUMNS, ActionTrajectory
from src.mpm.simulator import MPMSimulator, prepare_scene
from src.mpm.tape import MaterialTensors, SimState
from src.scene.observation import SurfaceObservation, observe
from src.scene.trajectories import generate_sysid_trajectory
from src.skill.demo import demo_prior
from src.skill.mapping import action_jacobian, compose_skill_gradient, skill_to_actions

from .line_search import line_search_step
from .rmsprop import PHYSICS_BOUNDS_BOX, SKILL_BOUNDS_BOX, UNBOUNDED, Bounds, rmsprop_step

logger = logging.getLogger(__name__)

# best result reported for real soil, kept as reference metadata
REFERENCE_SOIL_OPTIMUM = {"E": 182683.0, "nu": 0.242, "rho": 1566.0, "phi_f": 18.882}

PHYSICS_INIT_MODES = ("midpoint", "random", "config")
SKILL_INIT_MODES = ("demo", "midpoint", "random")

# settled initial states kept per material during system identification
SETTLE_CACHE_SIZE = 8


@dataclass
class Evaluation:
    """A scored solution with the gradient of its training loss"""
    train_loss: float
    val_loss: float
    grad: np.ndarray
    gradient: GradientResult
    observation: SurfaceObservation


@dataclass
class RunArtifacts:
    """Optional by-products of a run, filled in by the driver"""
    keep_observations: bool = False
    observations: dict[int, SurfaceObservation] = field(default_factory=dict)
    trace: Optional[GradientTrace] = None  # of the last iteration


@dataclass
class Problem:
    """What a driver needs to know about one kind of parameter vector"""
    kind: str
    parameter_names: list[str]
    stepsize: np.ndarray | float
    bounds: Bounds
    evaluate: Callable[[np.ndarray], Evaluation]
    candidate_loss: Callable[[np.ndarray], float]


def sanitize_gradient(
    grad: np.ndarray,
    label: str,
    names: Optional[list[str]] = None,
    log: Optional[logging.Logger] = None,
) -> np.ndarray:
    """Zero non-finite gradient components so the update stays finite, with a warning naming them"""
    grad = np.asarray(grad, dtype=np.float64)
    bad = ~np.isfinite(grad)
    if bad.any():
        indices = np.flatnonzero(bad)
        shown = [names[i] if names is not None else str(i) for i in indices[:8]]
        more = f" and {len(indices) - len(shown)} more" if len(indices) > len(shown) else ""
        (log or logger).warning(
            f"{label}: zeroing {len(indices)} non-finite gradient components ({', '.join(shown)}{more}); "
            f"this step ignores them"
        )
        grad = np.where(bad, 0.0, grad)
    return grad


def _grad_max(grad: np.ndarray) -> float:
    finite = np.abs(grad[np.isfinite(grad)])
    return float(finite.max()) if finite.size else math.nan


def _hmd_loss(obs: SurfaceObservation, target: SurfaceObservation, r_p: float) -> float:
    return hmd(rasterize_observation(obs, r_p), rasterize_observation(target, r_p))


def run_optimization(
    problem: Problem,
    init_solution,
    config: OptimizerConfig,
    record: RunRecord,
    use_line_search: bool = True,
    artifacts: Optional[RunArtifacts] = None,
) -> RunRecord:
    """
    Shared iteration loop of all drivers.

    Args:
        problem: Parameter layout, bounds, stepsizes and scoring callbacks
        init_solution: Starting parameter vector
        config: RMSProp and line-search settings
        record: Run record to append iterations to
        use_line_search: Pick the best of the multiplier candidates instead of
            a plain RMSProp step
        artifacts: Collects observations and the gradient trace when given

    Returns:
        The completed run record
    """
    run_logger = logging.getLogger(f"{__name__}.{record.label}")
    solution = problem.bounds.clamp(np.asarray(init_solution, dtype=np.float64))
    cache = np.zeros_like(solution)

    for iteration in range(config.iterations):
        started = time.perf_counter()
        try:
            scored = problem.evaluate(solution)
        except SimulationDivergedError as e:
            run_logger.error(f"Iteration {iteration}: rollout diverged: {e}")
            raise
        grad = sanitize_gradient(scored.grad, f"Iteration {iteration}", problem.parameter_names, run_logger)

        multiplier, candidate_losses = None, []
        if use_line_search:
            try:
                result = line_search_step(
                    solution, grad, cache, problem.candidate_loss, problem.stepsize, config, problem.bounds
                )
            except SimulationDivergedError as e:
                run_logger.error(f"Iteration {iteration}: {e}")
                raise
            new_solution, cache = result.solution, result.cache
            multiplier, candidate_losses = result.multiplier, result.candidate_losses
        else:
            new_solution, cache = rmsprop_step(solution, grad, cache, 1.0, problem.stepsize, config, problem.bounds)

        entry = IterationRecord(
            iteration=iteration,
            solution=[float(v) for v in solution],
            train_loss=scored.train_loss,
            val_loss=scored.val_loss,
            multiplier=multiplier,
            candidate_losses=candidate_losses,
            grad_max=_grad_max(scored.grad),
            clip_count=scored.gradient.clip_count,
            nonfinite_count=scored.gradient.nonfinite_count,
            first_nonfinite_substep=scored.gradient.first_nonfinite_substep,
            seconds=time.perf_counter() - started,
        )
        record.iterations.append(entry)
        if artifacts is not None:
            artifacts.trace = scored.gradient.trace
            if artifacts.keep_observations:
                artifacts.observations[iteration] = scored.observation

        chosen = f", multiplier x{multiplier:g}" if multiplier is not None else ""
        run_logger.info(
            f"Iteration {iteration}: train {entry.train_loss:.6g}, val {entry.val_loss:.6g}, "
            f"grad max {entry.grad_max:.3g}{chosen} ({entry.seconds:.1f}s)"
        )
        solution = new_solution

    best = record.best
    if best is not None:
        run_logger.info(f"Best validation loss {best.val_loss:.6g} at iteration {best.iteration}")
    return record


class SysidScene:
    """Simulator plus the unsettled block; the block is settled under each candidate material"""

    def __init__(self, scene: SceneConfig, sim: SimConfig):
        self.simulator, self.unsettled = prepare_scene(scene, sim, MaterialParams(), settle=False)
        self._settled: dict[tuple[float, ...], SimState] = {}
        self._lock = threading.Lock()

    def initial_state(self, params: MaterialParams) -> SimState:
        key = tuple(params.as_array())
        with self._lock:
            cached = self._settled.get(key)
        if cached is not None:
            return cached
        if self.simulator.sim.settle_substeps > 0:
            state = self.simulator.settle(self.unsettled, MaterialTensors.from_params(params))
        else:
            state = self.unsettled
        with self._lock:
            if len(self._settled) >= SETTLE_CACHE_SIZE:
                self._settled.pop(next(iter(self._settled)))
            self._settled[key] = state
        return state


def resolve_physics_init(mode: str, configured: MaterialParams, seed: int = 0) -> MaterialParams:
    if mode == "midpoint":
        return MaterialParams.midpoint()
    if mode == "random":
        return MaterialParams.random(np.random.default_rng(seed))
    if mode == "config":
        if not configured.within_bounds():
            raise ConfigError(f"configured material {configured.as_array().tolist()} lies outside the search ranges")
        return configured
    raise ConfigError(f"Unknown physics init '{mode}', expected one of {PHYSICS_INIT_MODES}")


def resolve_skill_init(mode: str, target: SurfaceObservation, seed: int = 0) -> SkillParams:
    if mode == "demo":
        return demo_prior(target)
    if mode == "midpoint":
        return SkillParams()
    if mode == "random":
        return SkillParams.random(np.random.default_rng(seed))
    raise ConfigError(f"Unknown skill init '{mode}', expected one of {SKILL_INIT_MODES}")


def run_sysid(
    target_opt: SurfaceObservation,
    target_val: SurfaceObservation,
    init: MaterialParams,
    scene: SceneConfig,
    sim: SimConfig,
    config: OptimizerConfig,
    reg: GradientRegularization,
    loss_kind: LossKind | None = None,
    use_line_search: bool | None = None,
    seed: int = 0,
    label: str = "sysid",
    artifacts: Optional[RunArtifacts] = None,
    sysid_scene: Optional[SysidScene] = None,
) -> RunRecord:
    """
    Identify E, nu, rho and phi_f from observations of the two fixed motions.

    The training loss is taken on the optimization motion, the validation loss
    on the validation motion. Both use the block settled under the candidate
    material.
    """
    loss_kind = LossKind(loss_kind if loss_kind is not None else config.loss_kind)
    use_line_search = config.use_line_search if use_line_search is None else use_line_search
    if not init.within_bounds():
        raise ConfigError(f"initial material {init.as_array().tolist()} lies outside the search ranges")

    sysid_scene = sysid_scene or SysidScene(scene, sim)
    simulator = sysid_scene.simulator
    traj_opt = generate_sysid_trajectory(TrajectoryKind.OPTIMIZATION, sim.dt, sim.v_l, sim.v_w)
    traj_val = generate_sysid_trajectory(TrajectoryKind.VALIDATION, sim.dt, sim.v_l, sim.v_w)
    r_p = scene.splat_radius

    def evaluate(solution: np.ndarray) -> Evaluation:
        params = MaterialParams.from_array(solution)
        initial = sysid_scene.initial_state(params)
        rollout = simulator.rollout(initial, traj_opt, params)
        losses = evaluate_losses(rollout.observation, target_opt, loss_kind, r_p)
        gradient = backward(simulator, rollout.tape, losses.point_grad, reg)
        val_obs = simulator.rollout(initial, traj_val, params).observation
        return Evaluation(
            train_loss=losses.loss,
            val_loss=validation_loss(val_obs, target_val, r_p),
            grad=gradient.param_grad,
            gradient=gradient,
            observation=rollout.observation,
        )

    def candidate_loss(solution: np.ndarray) -> float:
        params = MaterialParams.from_array(solution)
        rollout = simulator.rollout(sysid_scene.initial_state(params), traj_opt, params)
        return _hmd_loss(rollout.observation, target_opt, r_p)

    problem = Problem(
        kind="sysid",
        parameter_names=list(PHYSICS_PARAM_NAMES),
        stepsize=np.asarray(config.sysid_stepsizes, dtype=np.float64),
        bounds=PHYSICS_BOUNDS_BOX,
        evaluate=evaluate,
        candidate_loss=candidate_loss,
    )
    record = RunRecord(
        kind="sysid", label=label, parameter_names=problem.parameter_names, loss_kind=loss_kind,
        reg_mode=reg.mode, use_line_search=use_line_search, seed=seed,
        metadata={
            "init": init.model_dump(),
            "optimization_steps": len(traj_opt),
            "validation_steps": len(traj_val),
            "reference_soil_optimum": REFERENCE_SOIL_OPTIMUM,
        },
    )
    logger.info(
        f"System identification {label}: {loss_kind.value} loss, reg {reg.mode}, "
        f"line search {'on' if use_line_search else 'off'}, {len(traj_opt)}/{len(traj_val)} steps"
    )
    return run_optimization(problem, init.as_array(), config, record, use_line_search, artifacts)


def reference_surface_height(initial: SimState, scene: SceneConfig) -> float:
    """Mean surface height of the undisturbed block over the observation grid"""
    obs = observe(initial.x, scene.observation, scene.floor_height)
    return float(obs.points[:, 2].mean())


def _hole_metadata(obs: SurfaceObservation, target: SurfaceObservation, reference: float, r_p: float) -> dict:
    found = hole_statistics(rasterize_observation(obs, r_p), reference)
    wanted = hole_statistics(rasterize_observation(target, r_p), reference)
    return {
        "reference_height": reference,
        "target_hole": asdict(wanted),
        "best_hole": asdict(found),
        "hole_center_error": float(np.hypot(found.center[0] - wanted.center[0], found.center[1] - wanted.center[1])),
        "hole_depth_error": abs(found.depth - wanted.depth),
    }


def run_skill_opt(
    target: SurfaceObservation,
    init: SkillParams,
    params: MaterialParams,
    scene: SceneConfig,
    sim: SimConfig,
    config: OptimizerConfig,
    reg: GradientRegularization,
    rounding: Rounding = Rounding.ROUNDED,
    loss_kind: LossKind | None = None,
    use_line_search: bool | None = None,
    seed: int = 0,
    label: str = "skill",
    artifacts: Optional[RunArtifacts] = None,
    prepared: Optional[tuple[MPMSimulator, SimState]] = None,
) -> RunRecord:
    """
    Optimize the five skill parameters against a target surface.

    Action gradients from the reverse pass are pulled back through the
    skill-to-action Jacobian; the validation loss is taken on the same rollout.
    """
    rounding = Rounding(rounding)
    loss_kind = LossKind(loss_kind if loss_kind is not None else config.loss_kind)
    use_line_search = config.use_line_search if use_line_search is None else use_line_search
    simulator, initial = prepared or prepare_scene(scene, sim, params)
    r_p = scene.splat_radius
    best_obs: dict[str, tuple[float, SurfaceObservation]] = {}

    def evaluate(solution: np.ndarray) -> Evaluation:
        theta = SkillParams.from_array(solution)
        trajectory, plan = skill_to_actions(theta, sim, rounding)
        rollout = simulator.rollout(initial, trajectory, params)
        losses = evaluate_losses(rollout.observation, target, loss_kind, r_p)
        gradient = backward(simulator, rollout.tape, losses.point_grad, reg)
        grad = compose_skill_gradient(gradient.action_grad, action_jacobian(plan, sim))
        if math.isfinite(losses.validation) and losses.validation < best_obs.get("best", (math.inf, None))[0]:
            best_obs["best"] = (losses.validation, rollout.observation)
        return Evaluation(
            train_loss=losses.loss, val_loss=losses.validation, grad=grad,
            gradient=gradient, observation=rollout.observation,
        )

    def candidate_loss(solution: np.ndarray) -> float:
        trajectory, _ = skill_to_actions(SkillParams.from_array(solution), sim, rounding)
        return _hmd_loss(simulator.rollout(initial, trajectory, params).observation, target, r_p)

    problem = Problem(
        kind="skill",
        parameter_names=list(SKILL_PARAM_NAMES),
        stepsize=config.skill_stepsize,
        bounds=SKILL_BOUNDS_BOX,
        evaluate=evaluate,
        candidate_loss=candidate_loss,
    )
    record = RunRecord(
        kind="skill", label=label, parameter_names=problem.parameter_names, loss_kind=loss_kind,
        reg_mode=reg.mode, use_line_search=use_line_search, rounding=rounding, seed=seed,
        metadata={"init": init.model_dump(), "material": params.model_dump()},
    )
    logger.info(f"Skill optimization {label}: {rounding.value} step counts, {loss_kind.value} loss, reg {reg.mode}")
    run_optimization(problem, init.as_array(), config, record, use_line_search, artifacts)

    if "best" in best_obs:
        reference = reference_surface_height(initial, scene)
        record.metadata.update(_hole_metadata(best_obs["best"][1], target, reference, r_p))
    return record


def run_traj_opt(
    target: SurfaceObservation,
    init_trajectory: ActionTrajectory,
    params: MaterialParams,
    scene: SceneConfig,
    sim: SimConfig,
    config: OptimizerConfig,
    reg: GradientRegularization,
    loss_kind: LossKind | None = None,
    use_line_search: bool | None = None,
    seed: int = 0,
    label: str = "trajectory",
    artifacts: Optional[RunArtifacts] = None,
    prepared: Optional[tuple[MPMSimulator, SimState]] = None,
) -> RunRecord:
    """Gradient descent directly on all T x 6 action components, no skill structure"""
    steps = len(init_trajectory)
    if steps == 0:
        raise ConfigError("trajectory optimization needs a non-empty initial trajectory")
    loss_kind = LossKind(loss_kind if loss_kind is not None else config.loss_kind)
    use_line_search = config.use_line_search if use_line_search is None else use_line_search
    simulator, initial = prepared or prepare_scene(scene, sim, params)
    r_p = scene.splat_radius

    def as_trajectory(solution: np.ndarray) -> ActionTrajectory:
        return ActionTrajectory(solution.reshape(steps, len(ACTION_COLUMNS)))

    def evaluate(solution: np.ndarray) -> Evaluation:
        rollout = simulator.rollout(initial, as_trajectory(solution), params)
        losses = evaluate_losses(rollout.observation, target, loss_kind, r_p)
        gradient = backward(simulator, rollout.tape, losses.point_grad, reg)
        return Evaluation(
            train_loss=losses.loss, val_loss=losses.validation, grad=gradient.action_grad.ravel(),
            gradient=gradient, observation=rollout.observation,
        )

    def candidate_loss(solution: np.ndarray) -> float:
        return _hmd_loss(simulator.rollout(initial, as_trajectory(solution), params).observation, target, r_p)

    names = [f"{column}_{t}" for t in range(steps) for column in ACTION_COLUMNS]
    problem = Problem(
        kind="trajectory",
        parameter_names=names,
        stepsize=config.trajectory_stepsize,
        bounds=UNBOUNDED,
        evaluate=evaluate,
        candidate_loss=candidate_loss,
    )
    record = RunRecord(
        kind="trajectory", label=label, parameter_names=names, loss_kind=loss_kind,
        reg_mode=reg.mode, use_line_search=use_line_search, seed=seed,
        metadata={"steps": steps, "material": params.model_dump()},
    )
    logger.info(f"Trajectory optimization {label}: {steps} steps x {len(ACTION_COLUMNS)} components")
    return run_optimization(problem, init_trajectory.actions.ravel(), config, record, use_line_search, artifacts)


def landscape_objective(
    names: list[str],
    target: SurfaceObservation,
    scene: SceneConfig,
    sim: SimConfig,
    material: MaterialParams,
    theta: SkillParams | None = None,
    loss_kind: LossKind = LossKind.HMD,
    rounding: Rounding = Rounding.ROUNDED,
) -> Callable[[dict[str, float]], float]:
    """
    Loss as a function of the scanned parameters, all others held fixed.

    Physics names scan the material on the optimization motion; skill names
    scan the skill under ``material``, starting from ``theta``.
    """
    loss_kind = LossKind(loss_kind)
    r_p = scene.splat_radius
    if all(name in PHYSICS_PARAM_NAMES for name in names):
        sysid_scene = SysidScene(scene, sim)
        trajectory = generate_sysid_trajectory(TrajectoryKind.OPTIMIZATION, sim.dt, sim.v_l, sim.v_w)

        def physics_loss(point: dict[str, float]) -> float:
            params = MaterialParams(**{**material.model_dump(), **point})
            rollout = sysid_scene.simulator.rollout(sysid_scene.initial_state(params), trajectory, params)
            return evaluate_losses(rollout.observation, target, loss_kind, r_p).loss

        return physics_loss

    if all(name in SKILL_PARAM_NAMES for name in names):
        base = theta or SkillParams()
        simulator, initial = prepare_scene(scene, sim, material)

        def skill_loss(point: dict[str, float]) -> float:
            trajectory, _ = skill_to_actions(SkillParams(**{**base.model_dump(), **point}), sim, rounding)
            rollout = simulator.rollout(initial, trajectory, material)
            return evaluate_losses(rollout.observation, target, loss_kind, r_p).loss

        return skill_loss

    raise ConfigError(
        f"scan axes {names} must all be physics parameters {PHYSICS_PARAM_NAMES} "
        f"or all skill parameters {SKILL_PARAM_NAMES}"
    )
