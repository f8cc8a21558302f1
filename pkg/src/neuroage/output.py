"""Results CSV, JSON-lines event log, and long-format plot data."""

from __future__ import annotations

import csv
import json
import os
from datetime import datetime, timezone
from typing import Dict, Iterable, List, Sequence

from .harness import SimReport

RESULTS_HEADER = [
    "run_id",
    "workload",
    "tdsi_ms",
    "tdsc_ms",
    "temp_K",
    "nbti_aging",
    "tddb_aging",
    "nbti_aging_norm",
    "tddb_aging_norm",
    "isi_distortion_ms",
    "disorder",
    "overhead",
    "seed",
]
FIGURE_HEADER = ["series", "x", "y"]


class OutputSchemaError(RuntimeError):
    pass


def _num(value) -> str:
    return repr(float(value))


def results_row(report: SimReport) -> List[str]:
    s = report.summary
    return [
        report.run_id,
        report.workload,
        _num(report.tdsi),
        _num(report.tdsc),
        _num(report.temperature),
        _num(s.nbti_aging_total),
        _num(s.tddb_aging_total),
        _num(1.0 if s.nbti_aging_norm is None else s.nbti_aging_norm),
        _num(1.0 if s.tddb_aging_norm is None else s.tddb_aging_norm),
        _num(s.isi_distortion or 0.0),
        _num(s.disorder),
        _num(s.overhead),
        "" if report.seed is None else str(report.seed),
    ]


def append_results(path: str | os.PathLike, reports: Iterable[SimReport]) -> int:
    """Append one row per report, writing the header for a new file.

    Refuses to touch an existing file whose header differs from ``RESULTS_HEADER``.
    """
    exists = os.path.exists(path) and os.path.getsize(path) > 0
    if exists:
        with open(path, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), [])
        if header != RESULTS_HEADER:
            raise OutputSchemaError(f"{os.fspath(path)} has header {header}, expected {RESULTS_HEADER}")
    rows = [results_row(r) for r in reports]
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not exists:
            writer.writerow(RESULTS_HEADER)
        writer.writerows(rows)
    return len(rows)


def event_records(report: SimReport, timestamp: str, detail: bool = True) -> Iterable[dict]:
    yield {
        "type": "run",
        "run_id": report.run_id,
        "timestamp": timestamp,
        "isi_excluded_neurons": report.summary.isi_excluded,
        "provenance": report.provenance,
    }
    if not detail:
        return
    for ev in report.destress_events:
        yield {"type": "destress", "run_id": report.run_id, **ev}
    for ev in report.delayed_spikes:
        yield {"type": "delayed_spike", "run_id": report.run_id, **ev}


def append_events(path: str | os.PathLike, reports: Iterable[SimReport], detail: bool = True) -> None:
    stamp = datetime.now(timezone.utc).isoformat()
    with open(path, "a", encoding="utf-8") as fh:
        for report in reports:
            for rec in event_records(report, stamp, detail):
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def figure_rows(reports: Sequence[SimReport]) -> Dict[str, List[tuple]]:
    """Plot-ready (series, x, y) rows for the three sweep figures."""
    temps = sorted({r.temperature for r in reports})
    tdsis = sorted({r.tdsi for r in reports})
    cell = {(r.tdsi, r.temperature): r.summary for r in reports}
    ref_temp = temps[0]

    aging_vs_tdsi, metrics_vs_tdsi, aging_vs_temp = [], [], []
    for temp in temps:
        for tdsi in tdsis:
            s = cell[(tdsi, temp)]
            aging_vs_tdsi.append((f"nbti_{temp:g}K", tdsi, s.nbti_aging_norm))
            aging_vs_tdsi.append((f"tddb_{temp:g}K", tdsi, s.tddb_aging_norm))
            metrics_vs_tdsi.append((f"isi_distortion_{temp:g}K", tdsi, s.isi_distortion or 0.0))
            metrics_vs_tdsi.append((f"disorder_{temp:g}K", tdsi, s.disorder))
    for tdsi in tdsis:
        base = cell[(tdsi, ref_temp)]
        for temp in temps:
            s = cell[(tdsi, temp)]
            aging_vs_temp.append((f"nbti_tdsi{tdsi:g}", temp, s.nbti_aging_total / base.nbti_aging_total))
            aging_vs_temp.append((f"tddb_tdsi{tdsi:g}", temp, s.tddb_aging_total / base.tddb_aging_total))
    return {
        "fig_aging_vs_tdsi.csv": aging_vs_tdsi,
        "fig_metrics_vs_tdsi.csv": metrics_vs_tdsi,
        "fig_aging_vs_temp.csv": aging_vs_temp,
    }


def write_figures(out_dir: str | os.PathLike, reports: Sequence[SimReport]) -> List[str]:
    written = []
    for name, rows in figure_rows(reports).items():
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(FIGURE_HEADER)
            writer.writerows((series, _num(x), _num(y)) for series, x, y in rows)
        written.append(path)
    return written
