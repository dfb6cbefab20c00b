"""Experiment reports with CSV and JSON serialisation."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

ERROR_MARKER = "ERROR"


def format_float(x) -> str:
    return f"{float(x):.9g}"


def config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ExperimentReport:
    command: str
    params: dict
    columns: list
    rows: list = field(default_factory=list)
    seed: int | None = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    @property
    def metadata(self) -> dict:
        return {
            "command": self.command,
            "config_hash": config_hash(self.params),
            "seed": self.seed,
            "timestamp": self.timestamp,
            "params": self.params,
        }

    def add_row(self, **values):
        row = {c: values.get(c, ERROR_MARKER) for c in self.columns}
        self.rows.append(row)
        return row

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{c: _json_cell(row[c]) for c in self.columns} for row in self.rows]
        return json.dumps({"metadata": self.metadata, "columns": self.columns, "rows": rows}, indent=2)

    def format_table(self) -> str:
        cells = [self.columns] + [[_cell(r[c]) for c in self.columns] for r in self.rows]
        widths = [max(len(row[k]) for row in cells) for k in range(len(self.columns))]
        lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if hasattr(v, "item"):
        return v.item()
    return v


def _parse_cell(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def rows_from_csv(text: str) -> tuple[list, list]:
    reader = csv.reader(io.StringIO(text))
    columns = next(reader)
    rows = [dict(zip(columns, map(_parse_cell, rec))) for rec in reader if rec]
    return columns, rows


def rows_from_json(text: str) -> tuple[list, list]:
    doc = json.loads(text)
    return doc["columns"], doc["rows"]
