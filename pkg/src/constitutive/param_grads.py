"""
Analytic derivatives of the Cauchy stress with respect to the Lame constants.

With det(F') = 1 imposed, sigma = U diag(tau) U^T where
tau = 2 mu ln(S_hat) + lambda tr(ln S_hat). The derivative has an explicit
part and, on the cone surface, a part that flows through S_hat via the plastic
amount delta_gamma.
"""

import torch

from src.models.errors import ContractViolation

from .common import as_tensor
from .plasticity import PlasticCase, dp_project, friction_alpha
from .svd import SvdTriple


def _rotate(U: torch.Tensor, diagonal: torch.Tensor) -> torch.Tensor:
    return (U * diagonal.unsqueeze(-2)) @ U.transpose(-1, -2)


def constitutive_param_grads(svd: SvdTriple, s_hat, case, mu: float, lam: float, phi_f: float):
    """(d sigma/d mu, d sigma/d lambda), each (..., 3, 3)"""
    s_hat = as_tensor(s_hat)
    case = torch.as_tensor(case)
    S = as_tensor(svd.S)

    reference = dp_project(S, mu, lam, phi_f)
    if not torch.equal(reference.case, case.to(reference.case.dtype)):
        raise ContractViolation("case tags do not match the plastic return of the given singular values")

    log_hat = torch.log(s_hat)
    trace_hat = log_hat.sum(-1, keepdim=True)

    # explicit dependence of tau
    dtau_dmu = 2 * log_hat
    dtau_dlam = trace_hat.expand_as(log_hat)

    surface = case == int(PlasticCase.CONE_SURFACE)
    if torch.any(surface):
        eps = torch.log(S)
        trace = eps.sum(-1, keepdim=True)
        eps_hat = eps - trace / 3
        direction = eps_hat / torch.linalg.norm(eps_hat, dim=-1, keepdim=True).clamp_min(1e-300)
        alpha = friction_alpha(phi_f)

        dgamma_dmu = -3 * lam * trace * alpha / (2 * mu ** 2)
        dgamma_dlam = 3 * trace * alpha / (2 * mu)
        # d S_hat_k / d delta_gamma
        dshat_dgamma = -s_hat * direction
        # d tau_i / d S_hat_k = (2 mu delta_ik + lambda) / S_hat_k
        eye = torch.eye(3, dtype=s_hat.dtype)
        dtau_dshat = (2 * mu * eye + lam) / s_hat.unsqueeze(-2)
        dtau_dgamma = (dtau_dshat @ dshat_dgamma.unsqueeze(-1)).squeeze(-1)

        mask = surface.unsqueeze(-1)
        dtau_dmu = dtau_dmu + torch.where(mask, dtau_dgamma * dgamma_dmu, torch.zeros_like(dtau_dmu))
        dtau_dlam = dtau_dlam + torch.where(mask, dtau_dgamma * dgamma_dlam, torch.zeros_like(dtau_dlam))

    return _rotate(svd.U, dtau_dmu), _rotate(svd.U, dtau_dlam)
