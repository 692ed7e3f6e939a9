"""
Simulation state and the rollout tape consumed by the reverse pass.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from src.constitutive.common import DTYPE
from src.models.domain import CheckpointMode, MaterialParams
from src.scene.observation import SurfaceObservation

from .contact import RigidAgent


@dataclass
class SimState:
    """Particle fields plus the agent pose at one substep boundary"""
    x: torch.Tensor
    v: torch.Tensor
    F: torch.Tensor
    C: torch.Tensor
    agent: Optional[RigidAgent] = None

    def detach(self) -> "SimState":
        return SimState(
            x=self.x.detach(), v=self.v.detach(), F=self.F.detach(), C=self.C.detach(),
            agent=self.agent.detach() if self.agent is not None else None,
        )

    def leaf_copy(self) -> "SimState":
        """Detached copy whose tensors require grad"""
        agent = None
        if self.agent is not None:
            agent = RigidAgent(
                self.agent.position.detach().clone().requires_grad_(True),
                self.agent.orientation.detach().clone().requires_grad_(True),
                self.agent.half_extents,
            )
        return SimState(
            x=self.x.detach().clone().requires_grad_(True),
            v=self.v.detach().clone().requires_grad_(True),
            F=self.F.detach().clone().requires_grad_(True),
            C=self.C.detach().clone().requires_grad_(True),
            agent=agent,
        )

    def tensors(self) -> dict[str, torch.Tensor]:
        fields = {'x': self.x, 'v': self.v, 'F': self.F, 'C': self.C}
        if self.agent is not None:
            fields['agent_position'] = self.agent.position
            fields['agent_orientation'] = self.agent.orientation
        return fields

    def equals(self, other: "SimState") -> bool:
        mine, theirs = self.tensors(), other.tensors()
        return mine.keys() == theirs.keys() and all(torch.equal(mine[k], theirs[k]) for k in mine)


@dataclass
class MaterialTensors:
    """Material parameters as scalar tensors, optionally leaves of the autograd graph"""
    E: torch.Tensor
    nu: torch.Tensor
    rho: torch.Tensor
    phi_f: torch.Tensor

    @classmethod
    def from_params(cls, params: MaterialParams, requires_grad: bool = False) -> "MaterialTensors":
        values = [torch.tensor(float(v), dtype=DTYPE, requires_grad=requires_grad) for v in params.as_array()]
        return cls(*values)

    def grads(self) -> np.ndarray:
        return np.array([
            t.grad.item() if t.grad is not None else 0.0 for t in (self.E, self.nu, self.rho, self.phi_f)
        ])


@dataclass
class RolloutTape:
    """
    Checkpoints of a forward rollout.

    ``checkpoints[t]`` is the state at the start of global step t for every t
    that is a multiple of ``stride``, plus the final state under key T. In
    substep mode every substep input state is kept as well; in step mode the
    reverse pass re-simulates a segment of steps from its checkpoint.
    """
    actions: np.ndarray  # (T, 6)
    params: MaterialParams
    mode: CheckpointMode
    n_sub: int
    stride: int = 1
    checkpoints: dict[int, SimState] = field(default_factory=dict)
    substep_states: list[list[SimState]] = field(default_factory=list)
    observation: Optional[SurfaceObservation] = None

    @property
    def steps(self) -> int:
        return self.actions.shape[0]

    def __len__(self) -> int:
        return self.steps

    @property
    def final_state(self) -> SimState:
        return self.checkpoints[self.steps]

    def segments(self) -> list[tuple[int, int]]:
        """(start, end) step ranges between consecutive checkpoints, in reverse order"""
        starts = range(0, self.steps, self.stride)
        return [(s, min(s + self.stride, self.steps)) for s in reversed(starts)]
