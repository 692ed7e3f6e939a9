"""
Drucker-Prager return mapping in log-strain space.

Each particle lands in exactly one of three cases: expansion snaps to the cone
tip, states inside the cone stay elastic, and states outside are projected
onto the cone surface along the deviatoric direction.
"""

import math
from dataclasses import dataclass
from enum import IntEnum

import torch

from src.models.errors import ContractViolation

from .common import as_tensor

# yield test slack; keeps re-projected states classified as elastic
YIELD_TOLERANCE = 1e-12
# below this deviatoric norm the projection direction is undefined
MIN_DEVIATORIC_NORM = 1e-12


class PlasticCase(IntEnum):
    CONE_TIP = 0
    ELASTIC = 1
    CONE_SURFACE = 2


@dataclass
class PlasticReturn:
    """Projected singular values with their case tags"""
    s_hat: torch.Tensor
    case: torch.Tensor
    delta_gamma: torch.Tensor


def friction_alpha(phi_f):
    """sqrt(2/3) * 2 sin(phi) / (3 - sin(phi)), phi in degrees"""
    if isinstance(phi_f, torch.Tensor):
        sin_phi = torch.sin(torch.deg2rad(phi_f))
    else:
        sin_phi = math.sin(math.radians(phi_f))
    return math.sqrt(2.0 / 3.0) * 2 * sin_phi / (3 - sin_phi)


def dp_project(S, mu, lam, phi_f, check: bool = True) -> PlasticReturn:
    S = as_tensor(S)
    if check:
        if torch.any(S.detach() <= 0):
            raise ContractViolation("singular values must be positive")
        phi_check = phi_f.detach() if isinstance(phi_f, torch.Tensor) else torch.as_tensor(phi_f)
        if torch.any((phi_check <= 0) | (phi_check >= 90)):
            raise ContractViolation("friction angle must lie in (0, 90) degrees")

    eps = torch.log(S)
    trace = eps.sum(-1)
    eps_hat = eps - trace.unsqueeze(-1) / 3
    norm_sq = (eps_hat * eps_hat).sum(-1)
    eps_hat_norm = torch.sqrt(norm_sq.clamp_min(MIN_DEVIATORIC_NORM ** 2))
    alpha = friction_alpha(phi_f)
    delta_gamma = eps_hat_norm + (3 * lam + 2 * mu) / (2 * mu) * trace * alpha

    expanding = trace > 0
    yielding = ~expanding & (delta_gamma > YIELD_TOLERANCE)
    degenerate = yielding & (norm_sq < MIN_DEVIATORIC_NORM ** 2)
    tip = expanding | degenerate
    surface = yielding & ~degenerate

    projected = torch.exp(eps - (delta_gamma / eps_hat_norm).unsqueeze(-1) * eps_hat)
    s_hat = torch.where(surface.unsqueeze(-1), projected, S)
    s_hat = torch.where(tip.unsqueeze(-1), torch.ones_like(S), s_hat)

    case = torch.full(trace.shape, int(PlasticCase.ELASTIC), dtype=torch.int64, device=S.device)
    case = torch.where(surface, int(PlasticCase.CONE_SURFACE), case)
    case = torch.where(tip, int(PlasticCase.CONE_TIP), case)
    return PlasticReturn(s_hat=s_hat, case=case, delta_gamma=delta_gamma)
