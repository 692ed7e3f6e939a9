from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from datetime import datetime
from typing import Any, Optional
from enum import Enum

import numpy as np


class RegMode(str, Enum):
    """Adjoint regularization operators"""
    NONE = "none"
    CLIP = "clip"
    DYNAMIC_SCALE = "dynamic-scale"
    NORMALIZE = "normalize"


class LossKind(str, Enum):
    """Training loss used for gradient computation"""
    HMD = "hmd"
    EMD = "emd"


class Rounding(str, Enum):
    """Step-count handling in the skill-to-action mapping"""
    ROUNDED = "rounded"
    UNROUNDED = "unrounded"


class TrajectoryKind(str, Enum):
    """The two fixed system-identification motions"""
    OPTIMIZATION = "optimization"
    VALIDATION = "validation"


class CheckpointMode(str, Enum):
    """Granularity of the rollout tape"""
    STEP = "step"
    SUBSTEP = "substep"


PHYSICS_PARAM_NAMES = ("E", "nu", "rho", "phi_f")

# Search ranges used during system identification
PHYSICS_BOUNDS: dict[str, tuple[float, float]] = {
    "E": (50000.0, 200000.0),
    "nu": (0.1, 0.4),
    "rho": (1200.0, 2200.0),
    "phi_f": (10.0, 40.0),
}

SKILL_PARAM_NAMES = (
    "theta_displace",
    "theta_rotate",
    "theta_insert_dist",
    "theta_push_angle",
    "theta_push_dist",
)


class MaterialParams(BaseModel):
    """The four identifiable physics parameters of the granular material"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    E: float = 100000.0  # Young's modulus
    nu: float = 0.25  # Poisson's ratio
    rho: float = 1700.0  # density, kg/m^3
    phi_f: float = 25.0  # friction angle, degrees

    @field_validator("E", "rho")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("nu")
    @classmethod
    def _poisson(cls, value: float) -> float:
        if value >= 0.5:
            raise ValueError("Poisson's ratio >= 0.5 is incompressible (Lame lambda is singular)")
        if value <= 0:
            raise ValueError("Poisson's ratio must be positive")
        return value

    @field_validator("phi_f")
    @classmethod
    def _friction_angle(cls, value: float) -> float:
        if not 0 < value < 90:
            raise ValueError("friction angle must lie in (0, 90) degrees")
        return value

    @property
    def mu(self) -> float:
        return self.E / (2 * (1 + self.nu))

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))

    def as_array(self) -> np.ndarray:
        return np.array([self.E, self.nu, self.rho, self.phi_f], dtype=np.float64)

    @classmethod
    def from_array(cls, values, clamp: bool = False) -> "MaterialParams":
        values = np.asarray(values, dtype=np.float64)
        if clamp:
            values = clamp_physics(values)
        return cls(**dict(zip(PHYSICS_PARAM_NAMES, (float(v) for v in values))))

    def within_bounds(self) -> bool:
        return all(
            PHYSICS_BOUNDS[name][0] <= value <= PHYSICS_BOUNDS[name][1]
            for name, value in zip(PHYSICS_PARAM_NAMES, self.as_array())
        )

    @classmethod
    def midpoint(cls) -> "MaterialParams":
        """Center of the search ranges"""
        return cls.from_array([(lo + hi) / 2 for lo, hi in PHYSICS_BOUNDS.values()])

    @classmethod
    def random(cls, rng: np.random.Generator) -> "MaterialParams":
        """Uniform sample inside the search ranges"""
        return cls.from_array([rng.uniform(lo, hi) for lo, hi in PHYSICS_BOUNDS.values()])


def physics_bounds_array() -> tuple[np.ndarray, np.ndarray]:
    lower = np.array([PHYSICS_BOUNDS[name][0] for name in PHYSICS_PARAM_NAMES])
    upper = np.array([PHYSICS_BOUNDS[name][1] for name in PHYSICS_PARAM_NAMES])
    return lower, upper


def clamp_physics(values: np.ndarray) -> np.ndarray:
    lower, upper = physics_bounds_array()
    return np.clip(values, lower, upper)


class SkillParams(BaseModel):
    """Five-parameter digging skill, every component in [-1, 1]"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    theta_displace: float = Field(0.0, ge=-1.0, le=1.0)
    theta_rotate: float = Field(0.0, ge=-1.0, le=1.0)
    theta_insert_dist: float = Field(0.0, ge=-1.0, le=1.0)
    theta_push_angle: float = Field(0.0, ge=-1.0, le=1.0)
    theta_push_dist: float = Field(0.0, ge=-1.0, le=1.0)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in SKILL_PARAM_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values, clamp: bool = False) -> "SkillParams":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(SKILL_PARAM_NAMES),):
            raise ValueError(f"expected {len(SKILL_PARAM_NAMES)} skill parameters, got shape {values.shape}")
        if clamp:
            values = np.clip(values, -1.0, 1.0)
        return cls(**dict(zip(SKILL_PARAM_NAMES, (float(v) for v in values))))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "SkillParams":
        return cls.from_array(rng.uniform(-1.0, 1.0, size=len(SKILL_PARAM_NAMES)))


class ObservationConfig(BaseModel):
    """Surface sampling grid"""
    model_config = ConfigDict(extra="forbid")

    grid_res: int = Field(40, ge=1)
    extent: float = Field(0.24, gt=0)
    center: tuple[float, float] = (0.0, 0.0)

    @property
    def cell_size(self) -> float:
        return self.extent / self.grid_res


class ShovelConfig(BaseModel):
    """Oriented-box approximation of the printed shovel"""
    model_config = ConfigDict(extra="forbid")

    half_extents: tuple[float, float, float] = (0.03, 0.002, 0.05)
    initial_tip: tuple[float, float, float] = (0.0, 0.0, 0.075)


class SceneConfig(BaseModel):
    """Particle block, container and observation layout"""
    model_config = ConfigDict(extra="forbid")

    block_extent: tuple[float, float, float] = (0.28, 0.28, 0.07)
    fill_density: float = Field(5.0e6, gt=0)
    scramble: bool = True  # Owen-scrambled fill; False gives the plain sequence
    seed: int = 0
    container_half_extent: tuple[float, float] = (0.14, 0.14)
    floor_height: float = 0.0
    observation: ObservationConfig = ObservationConfig()
    splat_radius: float = Field(2.0e-7, ge=0)
    shovel: ShovelConfig = ShovelConfig()


class SimConfig(BaseModel):
    """Time stepping, grid and contact settings"""
    model_config = ConfigDict(extra="forbid")

    dt: float = Field(0.01, gt=0)
    n_sub: int = Field(20, ge=1)
    domain_min: tuple[float, float, float] = (-0.25, -0.25, -0.05)
    domain_size: float = Field(0.5, gt=0)
    grid_res: int = Field(64, ge=8)
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)
    friction_coeff: float = Field(0.4, ge=0)
    contact_margin: float = Field(0.5, ge=0)  # grid cells
    v_l: float = Field(0.05, gt=0)
    v_w: float = Field(0.5, gt=0)
    d_lift: float = Field(0.01, gt=0)
    settle_substeps: int = Field(100, ge=0)
    checkpoint_mode: CheckpointMode = CheckpointMode.STEP
    checkpoint_stride: int = Field(10, ge=1)  # global steps between stored checkpoints

    @property
    def dt_sub(self) -> float:
        return self.dt / self.n_sub

    @property
    def grid_dx(self) -> float:
        return self.domain_size / self.grid_res

    @property
    def inv_dx(self) -> float:
        return self.grid_res / self.domain_size


class OptimizerConfig(BaseModel):
    """RMSProp, line search and iteration settings"""
    model_config = ConfigDict(extra="forbid")

    beta: float = Field(0.9, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)
    iterations: int = Field(20, ge=1)
    ls_multipliers: tuple[float, ...] = (0.1, 0.5, 1.0, 1.5, 2.0)
    sysid_stepsizes: tuple[float, float, float, float] = (10000.0, 0.01, 50.0, 1.0)
    skill_stepsize: float = Field(0.03, gt=0)
    trajectory_stepsize: float = Field(0.004, gt=0)
    loss_kind: LossKind = LossKind.HMD
    use_line_search: bool = True
    max_workers: int = Field(1, ge=1)

    @field_validator("ls_multipliers")
    @classmethod
    def _sorted_multipliers(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("at least one line-search multiplier is required")
        return tuple(sorted(value))


class GradientRegularization(BaseModel):
    """Adjoint regularization settings"""
    model_config = ConfigDict(extra="forbid")

    mode: RegMode = RegMode.CLIP
    clip_threshold: float = Field(1e4, gt=0)
    oom_star: int = 4
    delta: float = Field(1e-6, gt=0)


class IterationRecord(BaseModel):
    """One completed optimizer iteration"""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    iteration: int
    solution: list[float]
    train_loss: float
    val_loss: float
    multiplier: Optional[float] = None  # None without line search
    candidate_losses: list[float] = []
    grad_max: float = 0.0
    clip_count: int = 0
    nonfinite_count: int = 0
    first_nonfinite_substep: Optional[int] = None
    seconds: float = 0.0


class RunRecord(BaseModel):
    """Per-iteration history of an optimization run"""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    kind: str  # sysid | skill | trajectory
    label: str
    parameter_names: list[str]
    loss_kind: LossKind = LossKind.HMD
    reg_mode: RegMode = RegMode.CLIP
    use_line_search: bool = True
    rounding: Optional[Rounding] = None
    seed: int = 0
    iterations: list[IterationRecord] = []
    metadata: dict[str, Any] = {}

    @property
    def best(self) -> Optional[IterationRecord]:
        finite = [it for it in self.iterations if np.isfinite(it.val_loss)]
        if not finite:
            return None
        # earliest iteration wins ties
        return min(finite, key=lambda it: (it.val_loss, it.iteration))

    def best_so_far(self) -> list[float]:
        best = float("inf")
        history = []
        for it in self.iterations:
            if np.isfinite(it.val_loss):
                best = min(best, it.val_loss)
            history.append(best)
        return history


class RunManifest(BaseModel):
    """Identity of a CLI run directory"""
    model_config = ConfigDict()

    command: str
    config_path: Optional[str] = None
    seed: int = 0
    input_hash: str
    out_dir: str
    started_at: datetime
    finished_at: Optional[datetime] = None
    outputs: list[str] = []
    argv: list[str] = []

    @model_validator(mode="after")
    def _finished_after_start(self) -> "RunManifest":
        if self.finished_at is not None and self.finished_at < self.started_at:
            raise ValueError("finished_at precedes started_at")
        return self
