"""CSV/JSON report emission.  Ball-valued cells become a value column plus an error column."""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .numerics import Ball

UNRESOLVED_TAG = "unresolved"
NOT_APPLICABLE = "n/a"
VALUE_DIGITS = 17


def fmt_ball(b: Ball | None, digits: int = VALUE_DIGITS) -> tuple[str, str]:
    if b is None:
        return UNRESOLVED_TAG, UNRESOLVED_TAG
    return b.mid_str(digits), b.rad_str()


def build_timestamp() -> str | None:
    """UTC time from SOURCE_DATE_EPOCH; None otherwise, so reruns stay byte-identical."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if not epoch:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class SeriesReport:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **cells) -> None:
        """Add a row; Ball cells expand to <col> and <col>_err."""
        row = {}
        for key, val in cells.items():
            if isinstance(val, Ball) or val is None:
                row[key], row[f"{key}_err"] = fmt_ball(val)
            elif f"{key}_err" in self.columns:
                # a Ball-typed column holding a tag such as NOT_APPLICABLE
                row[key] = row[f"{key}_err"] = str(val)
            elif isinstance(val, float):
                row[key] = repr(val)
            else:
                row[key] = str(val)
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise KeyError(f"{self.name}: missing cells {missing}")
        self.rows.append([row[c] for c in self.columns])

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {self.metadata[key]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "metadata": self.metadata,
            "columns": self.columns,
            "rows": [dict(zip(self.columns, r)) for r in self.rows],
        }
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        p_csv = out / f"{self.name}.csv"
        p_json = out / f"{self.name}.json"
        p_csv.write_text(self.to_csv())
        p_json.write_text(self.to_json())
        return p_csv, p_json


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return path
