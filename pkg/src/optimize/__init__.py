"""
Optimization: bounded RMSProp, the multiplier line search, the system
identification / skill / trajectory drivers, landscape scans and run-record
persistence.
"""

from .drivers import (
    Evaluation,
    Problem,
    RunArtifacts,
    SysidScene,
    landscape_objective,
    resolve_physics_init,
    resolve_skill_init,
    run_optimization,
    run_skill_opt,
    run_sysid,
    run_traj_opt,
    sanitize_gradient,
)
from .landscape import LandscapeGrid, ScanAxis, finite_difference_gradient, landscape_scan, parse_axis, write_landscape_csv
from .line_search import LineSearchResult, line_search_step, select_candidate
from .records import load_run_record, write_run_record
from .rmsprop import PHYSICS_BOUNDS_BOX, SKILL_BOUNDS_BOX, UNBOUNDED, Bounds, rmsprop_step

__all__ = [
    'Evaluation', 'Problem', 'RunArtifacts', 'SysidScene', 'landscape_objective',
    'resolve_physics_init', 'resolve_skill_init', 'run_optimization',
    'run_skill_opt', 'run_sysid', 'run_traj_opt', 'sanitize_gradient',
    'LandscapeGrid', 'ScanAxis', 'finite_difference_gradient', 'landscape_scan', 'parse_axis', 'write_landscape_csv',
    'LineSearchResult', 'line_search_step', 'select_candidate',
    'load_run_record', 'write_run_record',
    'PHYSICS_BOUNDS_BOX', 'SKILL_BOUNDS_BOX', 'UNBOUNDED', 'Bounds', 'rmsprop_step',
]
