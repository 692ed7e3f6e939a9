"""
Bounded RMSProp update on a flat parameter vector.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.models.domain import OptimizerConfig, physics_bounds_array
from src.models.errors import ContractViolation


@dataclass(frozen=True)
class Bounds:
    """Elementwise box constraint; None on a side means unbounded"""
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def clamp(self, values: np.ndarray) -> np.ndarray:
        if self.lower is None and self.upper is None:
            return values
        return np.clip(values, self.lower, self.upper)

    def contains(self, values: np.ndarray) -> bool:
        values = np.asarray(values)
        if self.lower is not None and np.any(values < self.lower):
            return False
        if self.upper is not None and np.any(values > self.upper):
            return False
        return True


PHYSICS_BOUNDS_BOX = Bounds(*physics_bounds_array())
SKILL_BOUNDS_BOX = Bounds(np.full(5, -1.0), np.full(5, 1.0))
UNBOUNDED = Bounds()


def rmsprop_step(
    solution,
    grad,
    cache,
    lr_scale: float,
    stepsize,
    config: OptimizerConfig,
    bounds: Bounds = UNBOUNDED,
) -> tuple[np.ndarray, np.ndarray]:
    """
    One RMSProp update followed by clamping.

    Args:
        solution: Current parameters
        grad: Loss gradient with respect to the parameters
        cache: Running mean of squared gradients
        lr_scale: Line-search multiplier applied to every stepsize
        stepsize: Base stepsize, scalar or one per parameter
        config: Supplies beta and epsilon
        bounds: Box the updated solution is clamped to

    Returns:
        The updated solution and cache
    """
    solution = np.asarray(solution, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    cache = np.asarray(cache, dtype=np.float64)
    if not (solution.shape == grad.shape == cache.shape):
        raise ContractViolation(
            f"shapes differ: solution {solution.shape}, grad {grad.shape}, cache {cache.shape}"
        )

    new_cache = config.beta * cache + (1.0 - config.beta) * grad * grad
    step = lr_scale * np.asarray(stepsize, dtype=np.float64) * grad / (np.sqrt(new_cache) + config.epsilon)
    return bounds.clamp(solution - step), new_cache
