"""
Particle/grid transfers with quadratic B-spline weights (MLS-MPM, APIC).

Only nodes touched by at least one particle are materialized: every
particle's 27 stencil nodes are mapped onto a compact list of active nodes,
and scatter/gather run over that list with ``index_add``, which accumulates
in a fixed order.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import torch

from src.constitutive.common import DTYPE
from src.models.domain import SimConfig
from src.models.errors import OutOfDomainError

# minimum particle distance from the domain boundary, in cells
INTERIOR_MARGIN = 2.0

_OFFSETS = torch.stack(torch.meshgrid(
    torch.arange(3), torch.arange(3), torch.arange(3), indexing='ij'
), dim=-1).reshape(27, 3)

GridHook = Callable[[str, torch.Tensor], None]


@dataclass
class Stencil:
    """Per-particle neighborhood of 27 active nodes"""
    nodes: torch.Tensor  # (N, 27) compact node index
    weights: torch.Tensor  # (N, 27)
    dpos: torch.Tensor  # (N, 27, 3) node position minus particle position, m
    active: torch.Tensor  # (K,) flat node index
    coords: torch.Tensor  # (K, 3) node positions, m

    @property
    def node_count(self) -> int:
        return self.active.shape[0]


@dataclass
class GridState:
    """Active-node mass, velocity after p2g and velocity after gravity and collision"""
    m: torch.Tensor  # (K,)
    v: torch.Tensor  # (K, 3)
    v_post: Optional[torch.Tensor]
    stencil: Stencil

    @property
    def momentum(self) -> torch.Tensor:
        return (self.m.unsqueeze(-1) * self.v).sum(0)


def nodes_per_axis(config: SimConfig) -> int:
    return config.grid_res + 1


def check_interior(x: torch.Tensor, config: SimConfig, step: int | None = None, substep: int | None = None) -> None:
    rel = (x.detach() - torch.as_tensor(config.domain_min, dtype=x.dtype)) * config.inv_dx
    low, high = INTERIOR_MARGIN, config.grid_res - INTERIOR_MARGIN
    outside = (rel < low) | (rel > high)
    if torch.any(outside):
        count = int(outside.any(dim=-1).sum())
        raise OutOfDomainError(f"{count} particles closer than {INTERIOR_MARGIN:g} cells to the grid boundary",
                               substep=substep, step=step)


def build_stencil(x: torch.Tensor, config: SimConfig) -> Stencil:
    inv_dx, dx = config.inv_dx, config.grid_dx
    domain_min = torch.as_tensor(config.domain_min, dtype=x.dtype)
    rel = (x - domain_min) * inv_dx
    base = torch.floor(rel.detach() - 0.5).long()
    fx = rel - base

    w = torch.stack([0.5 * (1.5 - fx) ** 2, 0.75 - (fx - 1) ** 2, 0.5 * (fx - 0.5) ** 2], dim=-1)  # (N, 3, 3)
    ox, oy, oz = _OFFSETS[:, 0], _OFFSETS[:, 1], _OFFSETS[:, 2]
    weights = w[:, 0, ox] * w[:, 1, oy] * w[:, 2, oz]
    dpos = (_OFFSETS.to(x.dtype).unsqueeze(0) - fx.unsqueeze(1)) * dx

    n = nodes_per_axis(config)
    ijk = base.unsqueeze(1) + _OFFSETS.unsqueeze(0)
    flat = (ijk[..., 0] * n + ijk[..., 1]) * n + ijk[..., 2]

    marked = torch.zeros(n ** 3, dtype=torch.bool)
    marked[flat.reshape(-1)] = True
    active = torch.nonzero(marked).squeeze(-1)
    lookup = torch.full((n ** 3,), -1, dtype=torch.long)
    lookup[active] = torch.arange(active.shape[0])

    coords_ijk = torch.stack([active // (n * n), (active // n) % n, active % n], dim=-1)
    coords = coords_ijk.to(DTYPE) * dx + domain_min
    return Stencil(nodes=lookup[flat], weights=weights, dpos=dpos, active=active, coords=coords)


def p2g(
    v: torch.Tensor,
    C: torch.Tensor,
    stress: torch.Tensor,
    p_mass,
    p_vol: float,
    stencil: Stencil,
    dt_sub: float,
    inv_dx: float,
    hook: Optional[GridHook] = None,
) -> GridState:
    """
    Scatter mass and APIC momentum, including the MLS stress impulse.

    Returns grid velocities normalized by mass; massless nodes carry zero.
    """
    affine = -dt_sub * p_vol * 4 * inv_dx ** 2 * stress + p_mass * C
    contribution = stencil.weights.unsqueeze(-1) * (
        p_mass * v.unsqueeze(1) + torch.einsum('nij,nkj->nki', affine, stencil.dpos)
    )
    K = stencil.node_count
    index = stencil.nodes.reshape(-1)
    mv = torch.zeros(K, 3, dtype=v.dtype).index_add(0, index, contribution.reshape(-1, 3))
    mass = (stencil.weights * p_mass).reshape(-1)
    m = torch.zeros(K, dtype=v.dtype).index_add(0, index, mass)

    if hook is not None:
        hook('grid_m', m)
    massive = (m > 0).unsqueeze(-1)
    m_safe = torch.where(massive.squeeze(-1), m, torch.ones_like(m))
    grid_v = torch.where(massive, mv / m_safe.unsqueeze(-1), torch.zeros_like(mv))
    if hook is not None:
        hook('grid_v', grid_v)
    return GridState(m=m, v=grid_v, v_post=None, stencil=stencil)


def grid_update(grid: GridState, gravity, dt_sub: float) -> torch.Tensor:
    """Add dt_sub * gravity on every node with mass"""
    g = torch.as_tensor(gravity, dtype=grid.v.dtype)
    massive = (grid.m > 0).unsqueeze(-1)
    return torch.where(massive, grid.v + dt_sub * g, grid.v)


def g2p(v_post: torch.Tensor, stencil: Stencil, inv_dx: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Gather particle velocity and affine matrix C"""
    gathered = v_post[stencil.nodes]  # (N, 27, 3)
    w = stencil.weights.unsqueeze(-1)
    v = (w * gathered).sum(1)
    C = 4 * inv_dx ** 2 * torch.einsum('nk,nki,nkj->nij', stencil.weights, gathered, stencil.dpos)
    return v, C
