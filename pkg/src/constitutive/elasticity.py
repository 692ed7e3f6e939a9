"""
Logarithmic-strain (Hencky form) elasticity: Lame constants, energy density,
first Piola-Kirchhoff stress and the Cauchy stress after plastic return.
"""

import torch

from src.models.errors import ContractViolation

from .common import as_tensor
from .svd import SvdTriple


def lame_from_material(E, nu):
    """mu, lambda from Young's modulus and Poisson's ratio; works on floats and tensors"""
    nu_check = nu.detach() if isinstance(nu, torch.Tensor) else torch.as_tensor(nu)
    if torch.any(nu_check >= 0.5):
        raise ContractViolation("Poisson's ratio >= 0.5 makes lambda singular (incompressible limit)")
    E_check = E.detach() if isinstance(E, torch.Tensor) else torch.as_tensor(E)
    if torch.any(E_check <= 0):
        raise ContractViolation("Young's modulus must be positive")
    mu = E / (2 * (1 + nu))
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    return mu, lam


def _log_singular_values(S: torch.Tensor, check: bool) -> torch.Tensor:
    if check and torch.any(S.detach() <= 0):
        raise ContractViolation("singular values must be positive")
    return torch.log(S)


def svk_energy(S, mu, lam, check: bool = True) -> torch.Tensor:
    """mu * tr((ln S)^2) + lambda/2 * (tr ln S)^2"""
    log_s = _log_singular_values(as_tensor(S), check)
    return mu * (log_s * log_s).sum(-1) + 0.5 * lam * log_s.sum(-1) ** 2


def _piola_diagonal(S: torch.Tensor, mu, lam, check: bool) -> torch.Tensor:
    log_s = _log_singular_values(S, check)
    trace = log_s.sum(-1, keepdim=True)
    return (2 * mu * log_s + lam * trace) / S


def piola_stress(svd: SvdTriple, mu, lam, check: bool = True) -> torch.Tensor:
    """P = U (2 mu S^-1 ln S + lambda tr(ln S) S^-1) V^T"""
    diagonal = _piola_diagonal(as_tensor(svd.S), mu, lam, check)
    return (svd.U * diagonal.unsqueeze(-2)) @ svd.V.transpose(-1, -2)


def plastic_deformation(svd: SvdTriple, s_hat: torch.Tensor) -> torch.Tensor:
    """F' = U diag(S_hat) V^T"""
    return (svd.U * s_hat.unsqueeze(-2)) @ svd.V.transpose(-1, -2)


def cauchy_stress(svd: SvdTriple, s_hat, mu, lam, check: bool = True) -> torch.Tensor:
    """
    sigma = P' F'^T with det(F') taken as 1.

    P' is the Piola stress evaluated at the projected singular values.
    """
    s_hat = as_tensor(s_hat)
    projected = SvdTriple(U=svd.U, S=s_hat, V=svd.V)
    P = piola_stress(projected, mu, lam, check=check)
    return P @ plastic_deformation(svd, s_hat).transpose(-1, -2)
