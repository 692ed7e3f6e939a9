"""
Run-record directories: iteration table, best solution and full JSON record.
"""

import csv
import logging
from pathlib import Path
from typing import Optional

from src.models.domain import RunRecord
from src.scene.io import write_point_cloud_csv
from src.scene.observation import SurfaceObservation

logger = logging.getLogger(__name__)

RECORD_FILE = 'run_record.json'
ITERATIONS_FILE = 'iterations.csv'
BEST_SOLUTION_FILE = 'best_solution.csv'
OBSERVATIONS_DIR = 'observations'

ITERATION_COLUMNS = [
    'iteration', 'train_loss', 'val_loss', 'multiplier', 'grad_max',
    'clip_count', 'nonfinite_count', 'first_nonfinite_substep', 'seconds',
]


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_iterations_csv(path: str | Path, record: RunRecord) -> None:
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(ITERATION_COLUMNS)
        for it in record.iterations:
            writer.writerow([_cell(getattr(it, column)) for column in ITERATION_COLUMNS])


def write_best_solution_csv(path: str | Path, record: RunRecord) -> bool:
    """Header of parameter names and one row with the best-validation solution"""
    best = record.best
    if best is None:
        logger.warning(f"Run {record.label} has no iteration with a finite validation loss")
        return False
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(record.parameter_names)
        writer.writerow([repr(float(v)) for v in best.solution])
    return True


def write_run_record(
    record: RunRecord,
    out_dir: str | Path,
    observations: Optional[dict[int, SurfaceObservation]] = None,
) -> list[Path]:
    """
    Persist a run record into ``out_dir``.

    Returns:
        The files written, relative paths included in the CLI manifest
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / RECORD_FILE
    path.write_text(record.model_dump_json(indent=2))
    written.append(path)

    path = out_dir / ITERATIONS_FILE
    write_iterations_csv(path, record)
    written.append(path)

    path = out_dir / BEST_SOLUTION_FILE
    if write_best_solution_csv(path, record):
        written.append(path)

    if observations:
        obs_dir = out_dir / OBSERVATIONS_DIR
        obs_dir.mkdir(exist_ok=True)
        for iteration, obs in sorted(observations.items()):
            path = obs_dir / f"iter_{iteration:02d}.csv"
            write_point_cloud_csv(path, obs.points)
            written.append(path)

    logger.info(f"Wrote run record {record.label} with {len(record.iterations)} iterations to {out_dir}")
    return written


def load_run_record(out_dir: str | Path) -> RunRecord:
    path = Path(out_dir) / RECORD_FILE
    return RunRecord.model_validate_json(path.read_text())
