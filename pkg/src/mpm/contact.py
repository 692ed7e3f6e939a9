"""
Kinematic rigid bodies and Coulomb frictional contact.

The container is five analytic half-spaces (floor and four walls). The
shovel is an oriented box whose origin is the blade tip; the plate extends
along its local +z axis. Orientations are unit quaternions (w, x, y, z) and
rotational actions are applied about the agent's local axes.
"""

import math
from dataclasses import dataclass

import torch

from src.constitutive.common import DTYPE, as_tensor

# squared tangential speed floor; keeps the friction scale differentiable at rest
TANGENTIAL_EPS = 1e-24
SMALL_ANGLE_SQ = 1e-8


def quat_multiply(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    aw, ax, ay, az = a.unbind(-1)
    bw, bx, by, bz = b.unbind(-1)
    return torch.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], dim=-1)


def quat_from_rotvec(rotvec: torch.Tensor) -> torch.Tensor:
    angle_sq = (rotvec * rotvec).sum(-1, keepdim=True)
    small = angle_sq < SMALL_ANGLE_SQ
    angle = torch.sqrt(torch.where(small, torch.ones_like(angle_sq), angle_sq))
    # Taylor expansions near zero
    sinc_half = torch.where(small, 0.5 - angle_sq / 48.0, torch.sin(angle / 2) / angle)
    cos_half = torch.where(small, 1.0 - angle_sq / 8.0, torch.cos(angle / 2))
    return torch.cat([cos_half, sinc_half * rotvec], dim=-1)


def quat_to_matrix(q: torch.Tensor) -> torch.Tensor:
    w, x, y, z = q.unbind(-1)
    return torch.stack([
        torch.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        torch.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        torch.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], dim=-2)


def yaw_quaternion(angle: float) -> torch.Tensor:
    return torch.tensor([math.cos(angle / 2), 0.0, 0.0, math.sin(angle / 2)], dtype=DTYPE)


# local x of the shovel maps onto world +y
SHOVEL_REST_ORIENTATION = (math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4))


@dataclass
class RigidAgent:
    """Shovel pose: blade-tip position and unit orientation quaternion"""
    position: torch.Tensor  # (3,)
    orientation: torch.Tensor  # (4,) w, x, y, z
    half_extents: tuple[float, float, float]

    @classmethod
    def at_rest(cls, tip, half_extents) -> "RigidAgent":
        return cls(
            position=as_tensor(tip).clone(),
            orientation=torch.tensor(SHOVEL_REST_ORIENTATION, dtype=DTYPE),
            half_extents=tuple(half_extents),
        )

    def rotation(self) -> torch.Tensor:
        return quat_to_matrix(self.orientation)

    def plate_center(self) -> torch.Tensor:
        return self.position + self.rotation()[:, 2] * self.half_extents[2]

    def moved(self, displacement: torch.Tensor) -> "RigidAgent":
        """Translate in the world frame, rotate about the local axes, renormalize"""
        orientation = quat_multiply(self.orientation, quat_from_rotvec(displacement[3:]))
        orientation = orientation / torch.linalg.vector_norm(orientation)
        return RigidAgent(self.position + displacement[:3], orientation, self.half_extents)

    def detach(self) -> "RigidAgent":
        return RigidAgent(self.position.detach().clone(), self.orientation.detach().clone(), self.half_extents)


@dataclass
class AgentMotion:
    """Pose after the move and the rigid velocity field during it"""
    agent: RigidAgent
    linear_velocity: torch.Tensor  # (3,) m/s
    angular_velocity: torch.Tensor  # (3,) rad/s, world frame

    def surface_velocity(self, points: torch.Tensor) -> torch.Tensor:
        return self.linear_velocity + torch.cross(
            self.angular_velocity.expand_as(points), points - self.agent.position, dim=-1
        )


def move_agent(agent: RigidAgent, displacement: torch.Tensor, dt_sub: float) -> AgentMotion:
    """Apply one substep's share of an action to the agent"""
    moved = agent.moved(displacement)
    linear = displacement[:3] / dt_sub
    angular = moved.rotation() @ (displacement[3:] / dt_sub)
    return AgentMotion(agent=moved, linear_velocity=linear, angular_velocity=angular)


def box_sdf(points: torch.Tensor, center: torch.Tensor, rotation: torch.Tensor, half_extents) -> tuple[torch.Tensor, torch.Tensor]:
    """Signed distance and outward world normal of an oriented box"""
    half = torch.as_tensor(half_extents, dtype=points.dtype)
    local = (points - center) @ rotation
    q = local.abs() - half
    outside = q.clamp_min(0.0)
    outside_sq = (outside * outside).sum(-1, keepdim=True)
    is_outside = outside_sq > 0
    outside_norm = torch.sqrt(torch.where(is_outside, outside_sq, torch.ones_like(outside_sq)))
    inside_depth = q.max(dim=-1, keepdim=True).values
    distance = torch.where(is_outside, outside_norm, inside_depth).squeeze(-1)

    ones = torch.ones_like(local)
    sign = torch.where(local >= 0, ones, -ones)
    normal_outside = sign * outside / outside_norm
    face = torch.nn.functional.one_hot(q.argmax(dim=-1), 3).to(points.dtype)
    normal_inside = sign * face
    normal_local = torch.where(is_outside, normal_outside, normal_inside)
    return distance, normal_local @ rotation.transpose(0, 1)


def coulomb_project(
    velocity: torch.Tensor,
    normal: torch.Tensor,
    distance: torch.Tensor,
    margin: float,
    friction_coeff: float,
    surface_velocity: torch.Tensor | None = None,
) -> torch.Tensor:
    """
    Remove the approaching normal component and apply Coulomb friction.

    Applies only where the query point lies within the margin and moves
    towards the surface relative to it; other velocities pass through.
    """
    relative = velocity if surface_velocity is None else velocity - surface_velocity
    v_n = (relative * normal).sum(-1, keepdim=True)
    contact = (distance.unsqueeze(-1) < margin) & (v_n < 0)
    v_t = relative - v_n * normal
    v_t_norm = torch.sqrt((v_t * v_t).sum(-1, keepdim=True) + TANGENTIAL_EPS)
    scale = (1 + friction_coeff * v_n / v_t_norm).clamp_min(0.0)
    projected = v_t * scale
    if surface_velocity is not None:
        projected = projected + surface_velocity
    return torch.where(contact, projected, velocity)


@dataclass
class Container:
    """Open box: floor at floor_height, walls at +-half_extent around the origin"""
    half_extent: tuple[float, float]
    floor_height: float = 0.0

    def planes(self, points: torch.Tensor):
        """(distance, normal) per half-space, normals pointing into the container"""
        hx, hy = self.half_extent
        dtype = points.dtype
        specs = (
            ((0.0, 0.0, 1.0), points[:, 2] - self.floor_height),
            ((1.0, 0.0, 0.0), points[:, 0] + hx),
            ((-1.0, 0.0, 0.0), hx - points[:, 0]),
            ((0.0, 1.0, 0.0), points[:, 1] + hy),
            ((0.0, -1.0, 0.0), hy - points[:, 1]),
        )
        for normal, distance in specs:
            yield distance, torch.tensor(normal, dtype=dtype).expand_as(points)


def collide(
    velocity: torch.Tensor,
    points: torch.Tensor,
    container: Container,
    motion: AgentMotion | None,
    friction_coeff: float,
    margin: float,
) -> torch.Tensor:
    """Container walls and floor first, then the moving shovel"""
    for distance, normal in container.planes(points):
        velocity = coulomb_project(velocity, normal, distance, margin, friction_coeff)
    if motion is not None:
        agent = motion.agent
        rotation = agent.rotation()
        distance, normal = box_sdf(points, agent.plate_center(), rotation, agent.half_extents)
        velocity = coulomb_project(
            velocity, normal, distance, margin, friction_coeff, motion.surface_velocity(points)
        )
    return velocity
