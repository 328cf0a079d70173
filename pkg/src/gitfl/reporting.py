"""Metrics files, time-to-accuracy and per-cell summaries."""

from __future__ import annotations

import csv
import statistics
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .orchestrator import MetricRow

METRIC_COLUMNS = [f.name for f in fields(MetricRow)]
SUMMARY_COLUMNS = [
    "cell", "runs", "final_accuracy_mean", "final_accuracy_std", "final_accuracy",
    "target", "reached", "time_to_target_mean", "time_to_target_std",
    "comm_to_target_mean", "comm_to_target_std",
]
SEED_SEPARATOR = "_seed-"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics(rows: Iterable[MetricRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in astuple(row)])


def read_metrics(path: str | Path) -> list[MetricRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != METRIC_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for r in reader:
            rows.append(MetricRow(float(r[0]), int(r[1]), float(r[2]), float(r[3]),
                                  int(r[4]), int(r[5]), float(r[6]), int(r[7])))
    return rows


def first_reaching(rows: Sequence[MetricRow], target: float) -> MetricRow | None:
    for row in rows:
        if row.master_accuracy >= target:
            return row
    return None


def time_to_accuracy(rows: Sequence[MetricRow], target: float) -> float | None:
    """Earliest virtual time at which the master accuracy reaches ``target``."""
    row = first_reaching(rows, target)
    return None if row is None else row.virtual_time


def _mean_std(xs: list[float]) -> tuple[float | None, float | None]:
    if not xs:
        return None, None
    return statistics.fmean(xs), statistics.stdev(xs) if len(xs) > 1 else 0.0


@dataclass
class CellSummary:
    cell: str
    runs: int
    final_accuracy_mean: float
    final_accuracy_std: float
    target: float
    reached: int
    time_to_target_mean: float | None
    time_to_target_std: float | None
    comm_to_target_mean: float | None
    comm_to_target_std: float | None

    @property
    def final_accuracy(self) -> str:
        return f"{self.final_accuracy_mean:.4f} ± {self.final_accuracy_std:.4f}"

    def as_row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in SUMMARY_COLUMNS]


def summarize_cell(cell: str, runs: Sequence[Sequence[MetricRow]], target: float) -> CellSummary:
    finals = [rows[-1].master_accuracy for rows in runs]
    hits = [first_reaching(rows, target) for rows in runs]
    hits = [h for h in hits if h is not None]
    acc_mean, acc_std = _mean_std(finals)
    t_mean, t_std = _mean_std([h.virtual_time for h in hits])
    c_mean, c_std = _mean_std([float(h.comm_count) for h in hits])
    return CellSummary(cell, len(runs), acc_mean, acc_std, target, len(hits), t_mean, t_std, c_mean, c_std)


def summarize(grouped: dict[str, list[Sequence[MetricRow]]], target: float) -> list[CellSummary]:
    return [summarize_cell(cell, runs, target) for cell, runs in grouped.items()]


def write_summary(summaries: Iterable[CellSummary], path_or_file) -> None:
    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", newline="") as fh:
            write_summary(summaries, fh)
        return
    w = csv.writer(path_or_file, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        w.writerow(s.as_row())


def load_run_directory(directory: str | Path) -> dict[str, list[list[MetricRow]]]:
    """Group every ``<cell>_seed-<n>.csv`` metrics file in ``directory`` by cell."""
    grouped: dict[str, list[tuple[int, list[MetricRow]]]] = {}
    for path in sorted(Path(directory).glob(f"*{SEED_SEPARATOR}*.csv")):
        cell, _, seed = path.stem.rpartition(SEED_SEPARATOR)
        grouped.setdefault(cell, []).append((int(seed), read_metrics(path)))
    return {cell: [rows for _, rows in sorted(runs, key=lambda r: r[0])] for cell, runs in grouped.items()}
