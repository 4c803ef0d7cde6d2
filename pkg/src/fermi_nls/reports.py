"""Structured results: named norm tables and LHS/RHS ratio scans."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable


def fmt(x: Any) -> str:
    """Round-trip float formatting used in every CSV artifact."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: str | Path, rows: Iterable[dict], columns: list[str] | None = None,
              comment: str | None = None) -> None:
    """Write rows in a fixed column order; ``comment`` becomes a leading '# ' line."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c, "")) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def safe_ratio(num: float, den: float) -> tuple[float, bool]:
    """num/den, with 0/0 reported as (0, True) instead of NaN."""
    if den == 0.0:
        if num == 0.0:
            return 0.0, True
        return math.inf, True
    return num / den, False


@dataclass
class NormReport:
    entries: dict[str, float]
    grid: dict = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {k: float(v) for k, v in self.entries.items()}
        for k, v in self.entries.items():
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"norm entry {k!r} must be finite and >= 0, got {v}")

    def __getitem__(self, key: str) -> float:
        return self.entries[key]

    @property
    def total(self) -> float:
        return self.entries.get("total", sum(self.entries.values()))

    def to_json(self) -> str:
        return json.dumps({"entries": self.entries, "grid": self.grid,
                           "meta": self.meta, "timestamp": self.timestamp},
                          indent=2, sort_keys=True)


@dataclass
class RatioReport:
    """One row per sample with lhs, rhs and ratio, plus ensemble summary."""

    name: str
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, lhs: float, rhs: float, **extra) -> dict:
        ratio, degenerate = safe_ratio(float(lhs), float(rhs))
        row = {"sample": len(self.rows), "lhs": float(lhs), "rhs": float(rhs),
               "ratio": ratio, "degenerate": degenerate, **extra}
        self.rows.append(row)
        return row

    @property
    def ratios(self) -> list[float]:
        return [r["ratio"] for r in self.rows]

    def summary(self) -> dict:
        rs = [r for r in self.ratios if math.isfinite(r)]
        if not rs:
            return {"count": len(self.rows), "min": 0.0, "max": 0.0, "mean": 0.0}
        return {"count": len(self.rows), "min": min(rs), "max": max(rs),
                "mean": math.fsum(rs) / len(rs)}

    @property
    def max(self) -> float:
        return self.summary()["max"]

    @property
    def min(self) -> float:
        return self.summary()["min"]

    def to_csv(self, path: str | Path) -> None:
        cols: list[str] = []
        for r in self.rows:
            for c in r:
                if c not in cols:
                    cols.append(c)
        write_csv(path, self.rows, cols or ["sample", "lhs", "rhs", "ratio", "degenerate"])

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "summary": self.summary(), "meta": self.meta},
                          indent=2, sort_keys=True, default=str)
