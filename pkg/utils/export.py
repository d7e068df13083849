"""CSV and plain-text writers for solver results.

Numbers are written with 17 significant digits so that re-reading a file
reproduces the doubles exactly. No timestamps go into data files.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DIGITS = 17


def format_value(value) -> str:
    if isinstance(value, (str, bool)):
        return str(value)
    if value is None:
        return ""
    return f"{float(value):.{DIGITS}g}"


def write_csv(path: Path, columns: Mapping[str, Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) > 1:
        raise ValueError(f"columns of unequal length for {path.name}: {sorted(lengths)}")
    rows = zip(*(columns[n] for n in names))
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    logger.debug("wrote %s", path)
    return path


def read_csv(path: Path) -> Dict[str, np.ndarray]:
    """Read a file written by write_csv; numeric columns become float arrays."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        data: List[List[str]] = [[] for _ in names]
        for row in reader:
            for i, cell in enumerate(row):
                data[i].append(cell)
    out: Dict[str, np.ndarray] = {}
    for name, cells in zip(names, data):
        try:
            out[name] = np.array([float(c) for c in cells])
        except ValueError:
            out[name] = np.array(cells, dtype=object)
    return out


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def summary_text(items: Mapping[str, object]) -> str:
    return "".join(f"{key} = {format_value(value)}\n" for key, value in items.items())
