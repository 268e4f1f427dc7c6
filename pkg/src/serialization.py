"""Utilities for writing result tables and JSON artifacts."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Sequence

SIGNIFICANT_DIGITS = 12


def format_number(x: Any) -> str:
    """Decimal rendering with 12 significant digits; other values pass through ``str``."""
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        return str(x)
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.{SIGNIFICANT_DIGITS}g}"


def serialize_rows(header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> str:
    """Serialize a result table.

    Parameters
    ----------
    header:
        Column names.
    rows:
        Table rows, one value per column.
    fmt:
        Serialization format: ``"json"`` or ``"csv"``.
    """
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} values for {len(header)} columns")
    if fmt == "json":
        return json.dumps([dict(zip(header, row)) for row in rows])
    if fmt == "csv":
        output = io.StringIO()
        writer = csv.writer(output, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
        return output.getvalue()
    raise ValueError(f"Unknown format: {fmt}")


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
    *,
    config_digest: str,
    seed: int | None,
) -> None:
    """Write a CSV table preceded by a ``# config_sha256=... seed=...`` line."""
    body = serialize_rows(header, rows, "csv")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_sha256={config_digest} seed={seed}\n")
        f.write(body)


def read_csv(path: str | Path) -> tuple[str, list[str], list[list[str]]]:
    """Return ``(comment, header, rows)`` of a table written by :func:`write_csv`."""
    with open(path, "r", encoding="utf-8") as f:
        comment = f.readline().rstrip("\n")
        reader = csv.reader(f)
        header = next(reader)
        return comment, header, [row for row in reader]


def write_json(path: str | Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
