"""CSV tables with a provenance comment line."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

Row = Sequence[object]


def format_value(value: object) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def write_table(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Row],
    config_hash: str,
    seed: int,
) -> Path:
    """Write `rows` under `header`, preceded by `# config_hash=... seed=...`."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash} seed={seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_table(path: Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Provenance fields and the data rows of a table written by `write_table`."""
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline().lstrip("#").split()
        provenance = dict(item.split("=", 1) for item in first if "=" in item)
        return provenance, list(csv.DictReader(fh))
