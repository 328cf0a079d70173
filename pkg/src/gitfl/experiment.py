"""Execute an experiment grid and persist its metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ExperimentSpec, cell_name, run_filename
from .orchestrator import MetricRow, RunConfig, run
from .reporting import summarize, write_metrics, write_summary

log = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"


def _run_one(cfg: RunConfig) -> list[MetricRow]:
    return run(cfg).rows


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> int:
    """Run every config, write one metrics file each plus ``summary.csv``.

    Returns 0 when every run completed, 1 otherwise; files of the runs
    that did complete are kept either way.
    """
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results: dict[int, list[MetricRow]] = {}
    failed = 0

    def collect(i: int, cfg: RunConfig, get):
        nonlocal failed
        try:
            rows = get()
        except Exception:
            failed += 1
            log.exception("run %s failed", run_filename(cfg))
            return
        write_metrics(rows, out / run_filename(cfg))
        results[i] = rows
        log.info("finished %s (final accuracy %.4f)", run_filename(cfg), rows[-1].master_accuracy)

    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            futures = [pool.submit(_run_one, cfg) for cfg in spec.runs]
            for i, (cfg, fut) in enumerate(zip(spec.runs, futures)):
                collect(i, cfg, fut.result)
    else:
        for i, cfg in enumerate(spec.runs):
            collect(i, cfg, lambda cfg=cfg: _run_one(cfg))

    grouped: dict[str, list[list[MetricRow]]] = {}
    for i, cfg in enumerate(spec.runs):
        if i in results:
            grouped.setdefault(cell_name(cfg), []).append(results[i])
    write_summary(summarize(grouped, spec.target), out / SUMMARY_FILE)
    return 1 if failed else 0
