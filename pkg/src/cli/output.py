from __future__ import annotations

import csv
import json
from dataclasses import asdict
from typing import Iterable, Literal, Optional, TextIO

from src.core.config import settings
from src.core.utils import format_number
from src.domain.results import RunRecord

OutputFormat = Literal["csv", "jsonl"]

# Fixed column order; wall_time is dropped with --no-timing.
COLUMNS: tuple[str, ...] = (
    "scenario",
    "axis",
    "axis_value",
    "bound",
    "value",
    "tau",
    "p",
    "w_index",
    "basis",
    "numerator",
    "denominator",
    "degenerate",
    "wall_time",
    "seed",
)
NUMERIC_COLUMNS = {"axis_value", "value", "tau", "p", "numerator", "denominator", "wall_time"}


def columns(timing: bool = True) -> tuple[str, ...]:
    return COLUMNS if timing else tuple(c for c in COLUMNS if c != "wall_time")


def header_comment(scenario: str, seed: int, **extra: object) -> str:
    parts = [f"seed={seed}", f"scenario={scenario}"]
    parts.extend(f"{key}={value}" for key, value in extra.items())
    return "# qsl-toolkit " + " ".join(parts)


def _cell(column: str, value: object, digits: int) -> str:
    if value is None:
        return ""
    if column in NUMERIC_COLUMNS:
        return format_number(value, digits)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _json_value(column: str, value: object, digits: int) -> object:
    if value is None or column not in NUMERIC_COLUMNS:
        return value
    text = format_number(value, digits)
    # JSON has no literal for non-finite floats.
    return text if text in ("inf", "-inf", "nan") else float(text)


def write_csv(
    records: Iterable[RunRecord],
    stream: TextIO,
    *,
    comment: Optional[str] = None,
    timing: bool = True,
    digits: Optional[int] = None,
) -> int:
    digits = digits or settings.SIGNIFICANT_DIGITS
    cols = columns(timing)
    if comment:
        stream.write(comment + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(cols)
    count = 0
    for record in records:
        row = asdict(record)
        writer.writerow([_cell(c, row[c], digits) for c in cols])
        count += 1
    return count


def write_jsonl(
    records: Iterable[RunRecord],
    stream: TextIO,
    *,
    comment: Optional[str] = None,
    timing: bool = True,
    digits: Optional[int] = None,
) -> int:
    digits = digits or settings.SIGNIFICANT_DIGITS
    cols = columns(timing)
    if comment:
        stream.write(json.dumps({"comment": comment}) + "\n")
    count = 0
    for record in records:
        row = asdict(record)
        payload = {c: _json_value(c, row[c], digits) for c in cols}
        stream.write(json.dumps(payload, ensure_ascii=False) + "\n")
        count += 1
    return count


def write_records(
    records: Iterable[RunRecord],
    stream: TextIO,
    fmt: OutputFormat = "csv",
    **kwargs,
) -> int:
    writer = write_csv if fmt == "csv" else write_jsonl
    return writer(records, stream, **kwargs)
