"""
MLS-MPM time stepping over global steps of n_sub substeps each.

A substep runs, in order: deformation-gradient update, SVD, plastic return
and stress, particle-to-grid transfer, agent move, gravity, grid collision,
grid-to-particle transfer, particle collision and advection.
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from src.constitutive.common import DTYPE
from src.constitutive.elasticity import cauchy_stress, lame_from_material, plastic_deformation
from src.constitutive.plasticity import dp_project
from src.constitutive.svd import SvdTriple, safe_svd
from src.models.domain import CheckpointMode, MaterialParams, SceneConfig, SimConfig
from src.models.errors import SimulationDivergedError
from src.models.trajectory import ActionTrajectory
from src.scene.io import write_point_cloud_csv
from src.scene.observation import SurfaceObservation, observe
from src.scene.particles import ParticleSystem, init_particle_block

from .contact import Container, RigidAgent, collide, move_agent
from .tape import MaterialTensors, RolloutTape, SimState
from .transfer import GridHook, build_stencil, check_interior, g2p, grid_update, p2g

logger = logging.getLogger(__name__)

# singular values are clamped here before taking logarithms
MIN_SINGULAR_VALUE = 1e-12
# CFL limit as a fraction of the grid spacing per substep
CFL_FRACTION = 0.5


@dataclass
class RolloutResult:
    state: SimState
    particles: ParticleSystem
    observation: SurfaceObservation
    tape: RolloutTape
    seconds: float = 0.0


class MPMSimulator:
    """Forward simulator for one scene; holds no per-rollout state"""

    def __init__(self, sim: SimConfig, scene: SceneConfig, particle_volume: float, name: str = "mpm"):
        self.sim = sim
        self.scene = scene
        self.particle_volume = particle_volume
        self.container = Container(scene.container_half_extent, scene.floor_height)
        self.margin = sim.contact_margin * sim.grid_dx
        self.logger = logging.getLogger(f"{__name__}.{name}")

    def substep(
        self,
        state: SimState,
        displacement: Optional[torch.Tensor],
        material: MaterialTensors,
        step: Optional[int] = None,
        substep: Optional[int] = None,
        hook: Optional[GridHook] = None,
    ) -> SimState:
        """
        Advance one substep.

        Args:
            state: State at the start of the substep
            displacement: This substep's share of the global action, (6,)
            material: Material parameters
            step, substep: Indices reported on divergence
            hook: Called with each grid tensor (grid_m, grid_v, grid_v_post)

        Returns:
            The state at the end of the substep
        """
        sim = self.sim
        dt = sim.dt_sub
        mu, lam = lame_from_material(material.E, material.nu)

        eye = torch.eye(3, dtype=DTYPE)
        F_trial = (eye + dt * state.C) @ state.F
        svd = safe_svd(F_trial)
        triple = SvdTriple(U=svd.U, S=svd.S.clamp_min(MIN_SINGULAR_VALUE), V=svd.V)
        plastic = dp_project(triple.S, mu, lam, material.phi_f, check=False)
        F_new = plastic_deformation(triple, plastic.s_hat)
        stress = cauchy_stress(triple, plastic.s_hat, mu, lam, check=False)

        check_interior(state.x, sim, step=step, substep=substep)
        stencil = build_stencil(state.x, sim)
        p_mass = material.rho * self.particle_volume
        grid = p2g(state.v, state.C, stress, p_mass, self.particle_volume, stencil, dt, sim.inv_dx, hook)

        motion = None
        if state.agent is not None and displacement is not None:
            motion = move_agent(state.agent, displacement, dt)
        agent = motion.agent if motion is not None else state.agent

        grid_v = grid_update(grid, sim.gravity, dt)
        grid.v_post = collide(grid_v, stencil.coords, self.container, motion, sim.friction_coeff, self.margin)
        if hook is not None:
            hook('grid_v_post', grid.v_post)

        v_new, C_new = g2p(grid.v_post, stencil, sim.inv_dx)
        v_new = collide(v_new, state.x + dt * v_new, self.container, motion, sim.friction_coeff, self.margin)
        x_new = state.x + dt * v_new

        new_state = SimState(x=x_new, v=v_new, F=F_new, C=C_new, agent=agent)
        self._check_finite(new_state, step, substep)
        return new_state

    def _check_finite(self, state: SimState, step, substep) -> None:
        for name, tensor in state.tensors().items():
            if not torch.isfinite(tensor.detach()).all():
                raise SimulationDivergedError(f"non-finite {name}", substep=substep, step=step)

    def step(self, state: SimState, action, material: MaterialTensors, step: Optional[int] = None) -> SimState:
        """Advance one global step, dividing the action evenly over the substeps"""
        displacement = torch.as_tensor(action, dtype=DTYPE) / self.sim.n_sub
        for k in range(self.sim.n_sub):
            state = self.substep(state, displacement, material, step=step, substep=k)
        return state

    def replay_steps(self, tape: RolloutTape, start: int, end: int, material: MaterialTensors) -> dict[int, SimState]:
        """States at the start of global steps start..end-1, re-simulated from the checkpoint at start"""
        state = tape.checkpoints[start]
        states = {start: state}
        with torch.no_grad():
            for t in range(start, end - 1):
                state = self.step(state, tape.actions[t], material, step=t)
                states[t + 1] = state
        return states

    def replay_substeps(
        self, tape: RolloutTape, t: int, material: MaterialTensors, start_state: Optional[SimState] = None
    ) -> list[SimState]:
        """Input states of every substep of global step t"""
        if tape.mode is CheckpointMode.SUBSTEP:
            return tape.substep_states[t]
        displacement = torch.as_tensor(tape.actions[t], dtype=DTYPE) / self.sim.n_sub
        states = []
        state = start_state if start_state is not None else tape.checkpoints[t]
        with torch.no_grad():
            for k in range(self.sim.n_sub):
                states.append(state)
                state = self.substep(state, displacement, material, step=t, substep=k)
        return states

    def max_speed(self, state: SimState) -> float:
        return float(torch.linalg.vector_norm(state.v.detach(), dim=-1).max()) if state.v.numel() else 0.0

    def _check_cfl(self, state: SimState, step: int) -> None:
        speed = self.max_speed(state)
        if speed * self.sim.dt_sub > CFL_FRACTION * self.sim.grid_dx:
            self.logger.warning(
                f"CFL condition violated at step {step}: max speed {speed:.4f} m/s moves "
                f"{speed * self.sim.dt_sub / self.sim.grid_dx:.2f} cells per substep"
            )

    def settle(self, state: SimState, material: MaterialTensors, substeps: Optional[int] = None) -> SimState:
        """Let the block come to rest under gravity without the agent, then zero its velocity"""
        substeps = self.sim.settle_substeps if substeps is None else substeps
        agent = state.agent
        settling = SimState(x=state.x, v=state.v, F=state.F, C=state.C, agent=None)
        with torch.no_grad():
            for k in range(substeps):
                settling = self.substep(settling, None, material, substep=k)
        self.logger.info(f"Settled block for {substeps} substeps, surface height {float(settling.x[:, 2].max()):.4f} m")
        return SimState(
            x=settling.x, v=torch.zeros_like(settling.v), F=settling.F, C=torch.zeros_like(settling.C), agent=agent
        )

    def rollout(
        self,
        initial: SimState,
        trajectory: ActionTrajectory,
        params: MaterialParams,
        dump_dir: Optional[str | Path] = None,
    ) -> RolloutResult:
        """
        Run every global step of a trajectory without building a graph.

        Returns the final state, its surface observation and the tape that the
        reverse pass replays.
        """
        started = time.perf_counter()
        material = MaterialTensors.from_params(params)
        mode = CheckpointMode(self.sim.checkpoint_mode)
        tape = RolloutTape(
            actions=np.array(trajectory.actions).reshape(-1, 6), params=params, mode=mode,
            n_sub=self.sim.n_sub, stride=self.sim.checkpoint_stride,
        )
        state = initial.detach()
        tape.checkpoints[0] = state
        if dump_dir is not None:
            Path(dump_dir).mkdir(parents=True, exist_ok=True)

        with torch.no_grad():
            for t, action in enumerate(tape.actions):
                displacement = torch.as_tensor(action, dtype=DTYPE) / self.sim.n_sub
                inputs = []
                for k in range(self.sim.n_sub):
                    if mode is CheckpointMode.SUBSTEP:
                        inputs.append(state)
                    state = self.substep(state, displacement, material, step=t, substep=k)
                if (t + 1) % tape.stride == 0 or t + 1 == tape.steps:
                    tape.checkpoints[t + 1] = state
                if mode is CheckpointMode.SUBSTEP:
                    tape.substep_states.append(inputs)
                self._check_cfl(state, t)
                if dump_dir is not None:
                    write_point_cloud_csv(Path(dump_dir) / f"step_{t:04d}.csv", state.x.numpy())
                if (t + 1) % 50 == 0:
                    self.logger.debug(f"Rollout step {t + 1}/{len(tape.actions)}")

        observation = observe(state.x, self.scene.observation, self.scene.floor_height)
        tape.observation = observation
        seconds = time.perf_counter() - started
        self.logger.info(f"Rollout of {len(tape.actions)} steps finished in {seconds:.1f}s")
        particles = ParticleSystem(
            x=state.x, v=state.v, F=state.F, C=state.C,
            volume=self.particle_volume, r_p=(self.particle_volume ** (1.0 / 3.0)) / 2,
        )
        return RolloutResult(state=state, particles=particles, observation=observation, tape=tape, seconds=seconds)


def prepare_scene(scene: SceneConfig, sim: SimConfig, material: MaterialParams, settle: bool = True):
    """
    Build the particle block, settle it and place the shovel at its start pose.

    Returns the simulator and the shared initial state.
    """
    particles = init_particle_block(
        scene.block_extent, scene.fill_density,
        center=(0.0, 0.0), floor_height=scene.floor_height, seed=scene.seed, scramble=scene.scramble,
    )
    simulator = MPMSimulator(sim, scene, particles.volume)
    state = SimState(x=particles.x, v=particles.v, F=particles.F, C=particles.C)
    if settle and sim.settle_substeps > 0:
        state = simulator.settle(state, MaterialTensors.from_params(material))
    state.agent = RigidAgent.at_rest(scene.shovel.initial_tip, scene.shovel.half_extents)
    return simulator, state
