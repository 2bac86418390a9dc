"""Deterministic text output shared by every module: fixed 17-significant-digit
floats, comma-separated tables with a header row."""

from __future__ import annotations

import csv
import io
import math
import os
from typing import Iterable, Sequence

__all__ = ["fmt", "csv_text", "write_csv", "write_text"]


def fmt(x) -> str:
    """Round-trippable float formatting; integers and bools pass through."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"  # drops the sign of -0.0 so reruns never differ on it
    return format(x, ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([v if isinstance(v, str) else fmt(v) for v in row] for row in rows)
    return buf.getvalue()


def write_text(path: str | os.PathLike, text: str) -> None:
    # newline="\n" keeps files byte-identical across platforms
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    write_text(path, csv_text(header, rows))
