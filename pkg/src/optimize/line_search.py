"""
Multiplier line search over RMSProp candidates.

Every multiplier scales all base stepsizes at once. Each candidate is scored by
a fresh forward rollout; the lowest loss wins and ties go to the smallest
multiplier.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from src.models.domain import OptimizerConfig
from src.models.errors import LineSearchDivergedError, SimulationDivergedError

from .rmsprop import UNBOUNDED, Bounds, rmsprop_step

logger = logging.getLogger(__name__)


@dataclass
class LineSearchResult:
    solution: np.ndarray
    cache: np.ndarray
    multiplier: float
    candidate_losses: list[float] = field(default_factory=list)  # in multiplier order


def _score(evaluate: Callable[[np.ndarray], float], candidate: np.ndarray, multiplier: float) -> float:
    try:
        loss = float(evaluate(candidate))
    except SimulationDivergedError as e:
        logger.warning(f"Line-search candidate x{multiplier} diverged: {e}")
        return math.nan
    return loss if math.isfinite(loss) else math.nan


def select_candidate(losses: list[float]) -> int:
    """Index of the lowest finite loss; the earliest index wins ties, -1 if none is finite"""
    best = -1
    for i, loss in enumerate(losses):
        if math.isfinite(loss) and (best < 0 or loss < losses[best]):
            best = i
    return best


def line_search_step(
    solution,
    grad,
    cache,
    evaluate: Callable[[np.ndarray], float],
    stepsize,
    config: OptimizerConfig,
    bounds: Bounds = UNBOUNDED,
) -> LineSearchResult:
    """
    Form one RMSProp candidate per multiplier and keep the best one.

    Args:
        solution: Current parameters
        grad: Loss gradient at ``solution``
        cache: RMSProp cache before this update
        evaluate: Maps a candidate to its HMD loss; must be deterministic and
            safe to call from several threads when ``config.max_workers > 1``
        stepsize: Base stepsize, scalar or per parameter
        config: Multipliers, beta, epsilon and worker count
        bounds: Box every candidate is clamped to

    Returns:
        The chosen candidate, the cache it was formed with and its multiplier

    Raises:
        LineSearchDivergedError: No candidate produced a finite loss
    """
    multipliers = list(config.ls_multipliers)
    candidates = [
        rmsprop_step(solution, grad, cache, m, stepsize, config, bounds) for m in multipliers
    ]

    if config.max_workers > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            losses = list(pool.map(_score, [evaluate] * len(candidates), [c[0] for c in candidates], multipliers))
    else:
        losses = [_score(evaluate, c[0], m) for c, m in zip(candidates, multipliers)]

    chosen = select_candidate(losses)
    if chosen < 0:
        raise LineSearchDivergedError(
            f"all {len(multipliers)} line-search candidates diverged (multipliers {multipliers})"
        )

    formatted = ", ".join(f"x{m:g}: {loss:.6g}" for m, loss in zip(multipliers, losses))
    logger.debug(f"Line-search losses {formatted}; chose x{multipliers[chosen]:g}")
    new_solution, new_cache = candidates[chosen]
    return LineSearchResult(
        solution=new_solution, cache=new_cache, multiplier=multipliers[chosen], candidate_losses=losses,
    )
