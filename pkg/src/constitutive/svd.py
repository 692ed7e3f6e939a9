"""
Batched 3x3 singular value decomposition with a stabilised backward pass.

Singular values come out descending and nonnegative. When det(V) < 0 the last
columns of U and V are both negated, so V is always a proper rotation and any
reflection of the input is carried by U.
"""

from dataclasses import dataclass

import torch

from .common import as_tensor

# smallest |s_j^2 - s_i^2| used in the backward pass
SVD_GAP_CLAMP = 1e-8


@dataclass
class SvdTriple:
    """F = U diag(S) V^T for a batch of 3x3 matrices"""
    U: torch.Tensor
    S: torch.Tensor
    V: torch.Tensor

    def reconstruct(self) -> torch.Tensor:
        return (self.U * self.S.unsqueeze(-2)) @ self.V.transpose(-1, -2)


def _clamp_gap(gap: torch.Tensor) -> torch.Tensor:
    return torch.where(gap >= 0, gap.clamp_min(SVD_GAP_CLAMP), gap.clamp_max(-SVD_GAP_CLAMP))


class _SafeSVD(torch.autograd.Function):

    @staticmethod
    def forward(ctx, F):
        U, S, Vh = torch.linalg.svd(F)
        V = Vh.transpose(-1, -2)
        flip = torch.where(torch.linalg.det(V) < 0, -1.0, 1.0).to(F.dtype)
        sign = torch.ones_like(S)
        sign[..., 2] = flip
        U = U * sign.unsqueeze(-2)
        V = V * sign.unsqueeze(-2)
        ctx.save_for_backward(U, S, V)
        return U, S, V

    @staticmethod
    def backward(ctx, grad_U, grad_S, grad_V):
        U, S, V = ctx.saved_tensors
        Ut, Vt = U.transpose(-1, -2), V.transpose(-1, -2)
        s2 = S * S
        gap = s2.unsqueeze(-2) - s2.unsqueeze(-1)  # [i, j] = s_j^2 - s_i^2
        inv_gap = 1.0 / _clamp_gap(gap)
        eye = torch.eye(3, dtype=S.dtype, device=S.device)
        inv_gap = inv_gap * (1 - eye)
        Smat = torch.diag_embed(S)

        grad_F = U @ torch.diag_embed(grad_S if grad_S is not None else torch.zeros_like(S)) @ Vt
        if grad_U is not None:
            skew_u = inv_gap * (Ut @ grad_U - grad_U.transpose(-1, -2) @ U)
            grad_F = grad_F + U @ (skew_u @ Smat) @ Vt
        if grad_V is not None:
            skew_v = inv_gap * (Vt @ grad_V - grad_V.transpose(-1, -2) @ V)
            grad_F = grad_F + U @ (Smat @ skew_v) @ Vt
        return grad_F


def safe_svd(F) -> SvdTriple:
    """Differentiable SVD of a batch (..., 3, 3)"""
    F = as_tensor(F)
    U, S, V = _SafeSVD.apply(F)
    return SvdTriple(U=U, S=S, V=V)
