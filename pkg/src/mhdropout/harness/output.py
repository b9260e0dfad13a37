"""CSV tables and the JSON mirror."""

from __future__ import annotations

import csv
import json
from pathlib import Path


def _cell(v):
    # repr keeps full float precision and is stable across runs.
    return repr(v) if isinstance(v, float) else v


def write_csv(path, table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_report(report, out_dir) -> list[Path]:
    """Write one CSV per table plus ``<experiment>.json``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in report.tables.items():
        path = out / f"{name}.csv"
        write_csv(path, table)
        written.append(path)
    doc = {
        "experiment": report.experiment,
        "config": report.config,
        "summary": report.summary,
        "tables": {name: {"header": t.header, "rows": t.rows} for name, t in report.tables.items()},
        "trial_durations_ms": report.durations_ms,
    }
    path = out / f"{report.experiment.replace('-', '_')}.json"
    path.write_text(json.dumps(doc, indent=1, default=float))
    written.append(path)
    return written
