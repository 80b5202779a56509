"""Metric and benchmark reports: a text table plus a sibling ``.jsonl`` file."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

from pydantic import BaseModel

from motiondistill.models.records import BenchmarkResult, MetricsRow, Provenance
from motiondistill.services.evaluation import APD_NORMALIZATION
from motiondistill.storage.container import write_atomic

logger = logging.getLogger("motiondistill.storage.reports")

_METRICS = ("ade", "fde", "mmade", "mmfde")


def records_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".jsonl")


def _jsonl(records: Sequence[BaseModel]) -> str:
    return "".join(r.model_dump_json() + "\n" for r in records)


def format_metrics_table(rows: Sequence[MetricsRow], provenance: Provenance) -> str:
    header = ["model", "time[s]", "APD"] + [f"{m.upper()}-{c}" for m in _METRICS for c in "BMW"]
    lines = [
        f"# seed={provenance.seed} config={provenance.config_hash[:12]}",
        f"# APD: {APD_NORMALIZATION}; median: lower median of S samples",
    ]
    if rows:
        lines.append(f"# S={rows[0].samples} tau={rows[0].tau} items={rows[0].n_items}")
    lines.append(" | ".join(header))
    for row in rows:
        cells = [row.model, "-" if row.inference_seconds is None else f"{row.inference_seconds:.4g}", f"{row.apd:.4f}"]
        for m in _METRICS:
            bmw = getattr(row, m)
            cells += [f"{bmw.best:.4f}", f"{bmw.median:.4f}", f"{bmw.worst:.4f}"]
        lines.append(" | ".join(cells))
    return "\n".join(lines) + "\n"


def write_metrics_report(path: str | Path, rows: Sequence[MetricsRow], provenance: Provenance) -> None:
    write_atomic(path, format_metrics_table(rows, provenance).encode())
    write_atomic(records_path(path), (provenance.model_dump_json() + "\n" + _jsonl(rows)).encode())
    logger.info("Metrics report written to %s", path)


def write_benchmark_report(path: str | Path, model: str, result: BenchmarkResult, provenance: Provenance) -> None:
    text = (
        f"# seed={provenance.seed} config={provenance.config_hash[:12]}\n"
        f"model | mean[s] | min[s] | std[s] | repeats\n"
        f"{model} | {result.mean_seconds:.6g} | {result.min_seconds:.6g} | {result.std_seconds:.3g} | {result.repeats}\n"
    )
    write_atomic(path, text.encode())
    write_atomic(records_path(path), (provenance.model_dump_json() + "\n" + result.model_dump_json() + "\n").encode())
    logger.info("Benchmark report written to %s", path)


def append_record(path: str | Path, record: BaseModel) -> None:
    """Line-delimited progress records (e.g. one per training epoch)."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "a") as f:
        f.write(record.model_dump_json() + "\n")
