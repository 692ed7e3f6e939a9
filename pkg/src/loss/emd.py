"""
Unnormalised Earth Mover's distance between point sets via linear assignment.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from src.models.errors import ContractViolation

# pairs closer than this contribute a zero gradient
COINCIDENT_DISTANCE = 1e-12


@dataclass
class EmdResult:
    value: float
    assignment: np.ndarray  # assignment[i] is the index in X_hat matched to X[i]


def _as_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ContractViolation(f"point set must have shape (N, 3), got {points.shape}")
    return points


def emd(X, X_hat) -> EmdResult:
    """Minimum over injective maps X -> X_hat of the summed Euclidean distance"""
    X, X_hat = _as_points(X), _as_points(X_hat)
    if len(X) > len(X_hat):
        raise ContractViolation(f"EMD needs |X| <= |X_hat|, got {len(X)} > {len(X_hat)}")
    if len(X) == 0:
        return EmdResult(0.0, np.zeros(0, dtype=np.int64))

    cost = cdist(X, X_hat)
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(len(X), dtype=np.int64)
    assignment[rows] = cols
    return EmdResult(float(cost[rows, cols].sum()), assignment)


def emd_grad(X, X_hat, assignment) -> np.ndarray:
    """d EMD / d X with the assignment held fixed"""
    X, X_hat = _as_points(X), _as_points(X_hat)
    diff = X - X_hat[np.asarray(assignment)]
    norm = np.linalg.norm(diff, axis=1, keepdims=True)
    safe = np.where(norm < COINCIDENT_DISTANCE, 1.0, norm)
    return np.where(norm < COINCIDENT_DISTANCE, 0.0, diff / safe)
