"""Per-substep adjoint statistics, exportable as CSV."""

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import torch


@dataclass
class TraceRow:
    substep: int  # global substep index, counted forward in time
    variable: str
    min: float
    max: float
    log10_scale: float  # log10 of the largest finite magnitude before regularization
    reg_min: float
    reg_max: float
    clipped: int
    nonfinite: int


def _finite_range(values: torch.Tensor) -> tuple[float, float, float]:
    finite = values[torch.isfinite(values)]
    if finite.numel() == 0:
        return math.nan, math.nan, math.nan
    largest = float(finite.abs().max())
    scale = math.log10(largest) if largest > 0 else -math.inf
    return float(finite.min()), float(finite.max()), scale


@dataclass
class GradientTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def record(self, substep: int, variable: str, raw: torch.Tensor, regularized: torch.Tensor,
               clipped: int = 0, nonfinite: int = 0) -> None:
        raw, regularized = raw.detach(), regularized.detach()
        low, high, scale = _finite_range(raw)
        reg_low, reg_high, _ = _finite_range(regularized)
        self.rows.append(TraceRow(substep, variable, low, high, scale, reg_low, reg_high, clipped, nonfinite))

    @property
    def clip_count(self) -> int:
        return sum(row.clipped for row in self.rows)

    @property
    def nonfinite_count(self) -> int:
        return sum(row.nonfinite for row in self.rows)

    @property
    def first_nonfinite_substep(self) -> Optional[int]:
        """Latest substep in time, i.e. the first one reached by the reverse pass"""
        hits = [row.substep for row in self.rows if row.nonfinite > 0]
        return max(hits) if hits else None

    def max_scale_by_substep(self, variable: Optional[str] = None) -> dict[int, float]:
        scales: dict[int, float] = {}
        for row in self.rows:
            if variable is not None and row.variable != variable:
                continue
            value = math.inf if row.nonfinite else row.log10_scale
            if math.isnan(value):
                continue
            scales[row.substep] = max(scales.get(row.substep, -math.inf), value)
        return scales

    def regularized_bound(self) -> float:
        """Largest finite regularized magnitude over all rows"""
        bound = 0.0
        for row in self.rows:
            for value in (row.reg_min, row.reg_max):
                if math.isfinite(value):
                    bound = max(bound, abs(value))
        return bound

    def to_csv(self, path: str | Path) -> None:
        with open(path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=[fl.name for fl in fields(TraceRow)])
            writer.writeheader()
            for row in sorted(self.rows, key=lambda r: (r.substep, r.variable)):
                writer.writerow(asdict(row))
