"""
Adjoint regularization: clipping, dynamic scaling and normalization.

Each operator works per vector along the trailing ``vector_dims`` axes, so a
particle's 3-vector or 3x3 block, or a grid node's mass or velocity, is
regularized independently of every other particle or node.
"""

import logging
from dataclasses import dataclass

import torch

from src.models.domain import GradientRegularization, RegMode

from .trace import GradientTrace

logger = logging.getLogger(__name__)

# vector axes of each regulated variable
VECTOR_DIMS = {
    'x': 1,
    'v': 1,
    'F': 2,
    'grid_m': 0,
    'grid_v': 1,
    'grid_v_post': 1,
}


@dataclass
class RegularizationStats:
    clipped: int = 0
    nonfinite: int = 0


def _as_vectors(grad: torch.Tensor, vector_dims: int) -> torch.Tensor:
    if vector_dims == 0:
        return grad.unsqueeze(-1)
    if grad.dim() == 0:
        return grad.reshape(1, 1)
    return grad.reshape(*grad.shape[:grad.dim() - vector_dims], -1)


def regularize(grad, reg: GradientRegularization, vector_dims: int | None = None) -> tuple[torch.Tensor, RegularizationStats]:
    """
    Apply the configured operator to an adjoint.

    Args:
        grad: Adjoint tensor
        reg: Operator and its constants
        vector_dims: Trailing axes forming one vector; default treats the whole
            input as a single vector

    Returns:
        The regularized adjoint (same shape) and clip/non-finite counts
    """
    grad = torch.as_tensor(grad)
    if not torch.is_floating_point(grad):
        grad = grad.to(torch.float64)
    vector_dims = grad.dim() if vector_dims is None else vector_dims
    finite = torch.isfinite(grad)
    stats = RegularizationStats(nonfinite=int((~finite).sum()))
    mode = RegMode(reg.mode)

    if mode is RegMode.NONE:
        return grad, stats

    if mode is RegMode.CLIP:
        threshold = reg.clip_threshold
        stats.clipped = int((grad.abs() > threshold).sum())
        cleaned = torch.nan_to_num(grad, nan=0.0, posinf=threshold, neginf=-threshold)
        return cleaned.clamp(-threshold, threshold), stats

    vectors = _as_vectors(grad, vector_dims)
    if mode is RegMode.DYNAMIC_SCALE:
        max_abs = vectors.abs().amax(dim=-1, keepdim=True)
        positive = max_abs > 0
        oom = torch.round(torch.log10(torch.where(positive, max_abs, torch.ones_like(max_abs))))
        delta_oom = oom - reg.oom_star
        scale = torch.where(positive & (delta_oom > 0), 10.0 ** delta_oom + reg.delta, torch.ones_like(max_abs))
        stats.clipped = int((scale != 1).sum())
        return (vectors / scale).reshape(grad.shape), stats

    norm = torch.linalg.vector_norm(vectors, dim=-1, keepdim=True)
    return (vectors / (norm + reg.delta)).reshape(grad.shape), stats


class AdjointRegularizer:
    """
    Applies the operator to the adjoints of the regulated variables during a
    reverse pass and records their statistics.

    Grid adjoints are reached through tensor hooks; particle adjoints are
    handed over explicitly by the reverse pass.
    """

    def __init__(self, reg: GradientRegularization, trace: GradientTrace | None = None):
        self.reg = reg
        self.trace = trace if trace is not None else GradientTrace()
        self.substep = 0

    def apply(self, name: str, grad: torch.Tensor) -> torch.Tensor:
        regularized, stats = regularize(grad, self.reg, VECTOR_DIMS.get(name))
        self.trace.record(self.substep, name, grad, regularized, stats.clipped, stats.nonfinite)
        return regularized

    def __call__(self, name: str, tensor: torch.Tensor) -> None:
        if tensor.requires_grad:
            tensor.register_hook(lambda grad, name=name: self.apply(name, grad))
