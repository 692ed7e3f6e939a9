"""
Reverse pass through a recorded rollout.

The forward rollout keeps a checkpoint every ``checkpoint_stride`` steps. The
reverse pass walks the checkpoint segments backwards: it re-simulates the step
states of a segment, recovers each step's substep input states (from the tape
in substep mode), rebuilds one substep's graph at a time and pulls the running
adjoint through it with ``torch.autograd.backward``. Adjoints of the regulated variables are
regularized after every substep; grid adjoints are regularized inside the
substep through tensor hooks.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from src.constitutive.common import DTYPE
from src.constitutive.elasticity import cauchy_stress, lame_from_material
from src.constitutive.param_grads import constitutive_param_grads
from src.constitutive.plasticity import dp_project
from src.constitutive.svd import SvdTriple, safe_svd
from src.models.domain import CheckpointMode, GradientRegularization, MaterialParams
from src.models.errors import ContractViolation
from src.models.trajectory import ACTION_DIM
from src.mpm.simulator import MIN_SINGULAR_VALUE, MPMSimulator
from src.mpm.tape import MaterialTensors, RolloutTape, SimState
from src.scene.observation import SurfaceObservation

from .regularize import AdjointRegularizer
from .trace import GradientTrace

logger = logging.getLogger(__name__)

REGULATED_PARTICLE_FIELDS = ('x', 'v', 'F')
# relative disagreement tolerated between analytic and autograd stress derivatives
STRESS_GRAD_TOLERANCE = 1e-6


@dataclass
class GradientResult:
    action_grad: np.ndarray  # (T, 6)
    param_grad: np.ndarray  # (4,) ordered E, nu, rho, phi_f
    trace: GradientTrace
    seconds: float = 0.0
    stress_grad_mismatch: float = 0.0

    @property
    def clip_count(self) -> int:
        return self.trace.clip_count

    @property
    def nonfinite_count(self) -> int:
        return self.trace.nonfinite_count

    @property
    def first_nonfinite_substep(self) -> Optional[int]:
        return self.trace.first_nonfinite_substep


def observation_to_particle_grad(observation: SurfaceObservation, point_grad, n_particles: int) -> torch.Tensor:
    """Route d loss / d observation points onto the particles they were taken from"""
    point_grad = torch.as_tensor(np.asarray(point_grad), dtype=DTYPE)
    source = torch.as_tensor(observation.source_index)
    valid = source >= 0
    grad = torch.zeros(n_particles, 3, dtype=DTYPE)
    return grad.index_add(0, source[valid], point_grad[valid])


def stress_gradient_mismatch(state: SimState, params: MaterialParams, seed: int = 0) -> float:
    """
    Relative disagreement between the analytic Lame-constant derivatives of the
    Cauchy stress and the autograd derivatives the reverse pass accumulates.

    Both are contracted with one random direction per particle and evaluated at
    the plastic return of ``state.F``.
    """
    with torch.no_grad():
        svd = safe_svd(state.F.detach())
    triple = SvdTriple(U=svd.U, S=svd.S.clamp_min(MIN_SINGULAR_VALUE), V=svd.V)
    mu_value, lam_value = lame_from_material(params.E, params.nu)
    projected = dp_project(triple.S, mu_value, lam_value, params.phi_f, check=False)
    dmu, dlam = constitutive_param_grads(
        triple, projected.s_hat, projected.case, mu_value, lam_value, params.phi_f
    )

    generator = torch.Generator().manual_seed(seed)
    direction = torch.randn(dmu.shape, generator=generator, dtype=DTYPE)
    mu = torch.tensor(mu_value, dtype=DTYPE, requires_grad=True)
    lam = torch.tensor(lam_value, dtype=DTYPE, requires_grad=True)
    with torch.enable_grad():
        plastic = dp_project(triple.S, mu, lam, params.phi_f, check=False)
        stress = cauchy_stress(triple, plastic.s_hat, mu, lam, check=False)
        autograd_mu, autograd_lam = torch.autograd.grad((stress * direction).sum(), (mu, lam))

    analytic = torch.stack([(dmu * direction).sum(), (dlam * direction).sum()])
    numeric = torch.stack([autograd_mu, autograd_lam])
    scale = torch.maximum(analytic.abs().max(), numeric.abs().max()).clamp_min(1e-300)
    return float((analytic - numeric).abs().max() / scale)


def backward_from_particles(
    simulator: MPMSimulator,
    tape: RolloutTape,
    particle_grad: torch.Tensor,
    reg: GradientRegularization,
) -> GradientResult:
    """Action and material gradients given d loss / d final particle positions"""
    started = time.perf_counter()
    material = MaterialTensors.from_params(tape.params, requires_grad=True)
    replay_material = MaterialTensors.from_params(tape.params)
    regularizer = AdjointRegularizer(reg)
    n_sub = tape.n_sub

    final = tape.final_state
    adjoint = {name: torch.zeros_like(tensor) for name, tensor in final.tensors().items()}
    adjoint['x'] = torch.as_tensor(particle_grad, dtype=DTYPE).clone()
    action_grad = np.zeros((tape.steps, ACTION_DIM))

    for start, end in tape.segments():
        step_states = None
        if tape.mode is not CheckpointMode.SUBSTEP:
            step_states = simulator.replay_steps(tape, start, end, replay_material)
        for t in reversed(range(start, end)):
            start_state = step_states[t] if step_states is not None else None
            inputs = simulator.replay_substeps(tape, t, replay_material, start_state=start_state)
            action = torch.tensor(tape.actions[t], dtype=DTYPE, requires_grad=True)
            for k in reversed(range(n_sub)):
                regularizer.substep = t * n_sub + k
                leaf = inputs[k].leaf_copy()
                with torch.enable_grad():
                    out = simulator.substep(leaf, action / n_sub, material, step=t, substep=k, hook=regularizer)
                    outputs = out.tensors()
                    names = [name for name, tensor in outputs.items() if tensor.requires_grad]
                    torch.autograd.backward([outputs[n] for n in names], grad_tensors=[adjoint[n] for n in names])

                adjoint = {
                    name: tensor.grad if tensor.grad is not None else torch.zeros_like(tensor)
                    for name, tensor in leaf.tensors().items()
                }
                for name in REGULATED_PARTICLE_FIELDS:
                    adjoint[name] = regularizer.apply(name, adjoint[name])

            if action.grad is not None:
                action_grad[t] = action.grad.numpy()
        logger.debug(f"Reverse pass finished segment {start}-{end}")

    result = GradientResult(
        action_grad=action_grad,
        param_grad=material.grads(),
        trace=regularizer.trace,
        seconds=time.perf_counter() - started,
        stress_grad_mismatch=stress_gradient_mismatch(final, tape.params),
    )
    if result.stress_grad_mismatch > STRESS_GRAD_TOLERANCE:
        logger.warning(
            f"Autograd stress derivatives disagree with the analytic ones by {result.stress_grad_mismatch:.2e} "
            f"(relative) at the final state; material gradients may be unreliable"
        )
    if result.nonfinite_count:
        logger.warning(
            f"Reverse pass met {result.nonfinite_count} non-finite adjoint entries, "
            f"first at substep {result.first_nonfinite_substep}"
        )
    logger.info(f"Reverse pass over {tape.steps} steps finished in {result.seconds:.1f}s")
    return result


def backward(
    simulator: MPMSimulator,
    tape: RolloutTape,
    point_grad,
    reg: GradientRegularization,
) -> GradientResult:
    """
    Gradients of a loss on the final observation.

    Args:
        simulator: The simulator that produced the tape
        tape: Rollout tape, with its observation
        point_grad: d loss / d observation points, (grid_res^2, 3)
        reg: Adjoint regularization

    Returns:
        d loss / d actions (T, 6) and d loss / d (E, nu, rho, phi_f)
    """
    if tape.observation is None:
        raise ContractViolation("tape has no observation; run a rollout first")
    n_particles = tape.final_state.x.shape[0]
    particle_grad = observation_to_particle_grad(tape.observation, point_grad, n_particles)
    return backward_from_particles(simulator, tape, particle_grad, reg)
