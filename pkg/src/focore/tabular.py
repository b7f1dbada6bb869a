"""Deterministic CSV/JSONL row writers shared by the report commands."""

from __future__ import annotations

import csv
import json
import os


def write_rows(path: str, fieldnames: list[str], rows: list[dict], fmt: str) -> None:
    """Write rows as CSV (stable header) or JSONL; LF line endings."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps({k: row.get(k) for k in fieldnames}))
                fh.write("\n")
    else:
        raise ValueError(f"unknown output format '{fmt}'")
