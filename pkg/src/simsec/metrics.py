"""Stable, versioned CSV schema for per-iteration training metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    env_steps: int
    mean_asr: float
    mean_reward: float
    jain: float
    qos_violation_rate: float
    surrogate_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    wall_seconds: float

    def __post_init__(self):
        import math

        if self.env_steps < 0 or self.iteration < 1:
            raise ValueError("iteration must be >= 1 and env_steps >= 0")
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, float) and not math.isfinite(val):
                raise ValueError(f"metrics field {f.name} is not finite")


COLUMNS = ["schema_version"] + [f.name for f in fields(MetricsRow)]


def write_metrics_csv(path, rows):
    """Write rows (MetricsRow or compatible dicts) with the schema header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in rows:
            if isinstance(row, MetricsRow):
                values = [getattr(row, f.name) for f in fields(MetricsRow)]
            else:
                values = [row[name] for name in COLUMNS[1:]]
            writer.writerow([SCHEMA_VERSION] + [repr(v) if isinstance(v, float) else v
                                                for v in values])


def read_metrics_csv(path):
    """Parse a metrics file back into MetricsRow values.

    Raises ValueError on any schema mismatch (missing columns, wrong
    version, or rows of the wrong width).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != COLUMNS:
            raise ValueError(f"unexpected metrics schema in {path}: {header}")
        rows = []
        for line in reader:
            if len(line) != len(COLUMNS):
                raise ValueError(f"malformed metrics row in {path}: {line}")
            if int(line[0]) != SCHEMA_VERSION:
                raise ValueError(f"unsupported metrics schema version {line[0]}")
            rows.append(
                MetricsRow(
                    iteration=int(line[1]),
                    env_steps=int(line[2]),
                    **{
                        name: float(val)
                        for name, val in zip(COLUMNS[3:], line[3:])
                    },
                )
            )
    return rows
