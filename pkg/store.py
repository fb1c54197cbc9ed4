#!/usr/bin/env python3
"""CSV storage for experiment results and point-cloud dumps."""

from __future__ import annotations

import csv
import math
import tempfile
from pathlib import Path
from typing import Iterable, List

from models import PointCloud, ResultRecord


CSV_HEADER = [
    "experiment",
    "knob",
    "value",
    "measure",
    "bound",
    "pass",
    "seconds",
]

CLOUD_HEADER = ["member", "site", "re", "im"]


class StorageError(Exception):
    pass


def format_float(value: float) -> str:
    return repr(float(value))


def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value) and text.strip().lower() != "nan":
        raise ValueError(text)
    return value


def _serialize_record(record: ResultRecord) -> List[str]:
    return [
        record.experiment,
        record.knob,
        record.value,
        format_float(record.measure),
        format_float(record.bound),
        "true" if record.passed else "false",
        "" if record.seconds is None else format_float(record.seconds),
    ]


def _deserialize_row(row: List[str]) -> ResultRecord:
    if len(row) < len(CSV_HEADER):
        raise StorageError("Corrupt CSV row")
    experiment, knob, value, measure, bound, passed, seconds = row[: len(CSV_HEADER)]
    if passed not in ("true", "false"):
        raise StorageError(f"Invalid pass flag '{passed}' in results")
    try:
        measure_value = _parse_float(measure)
        bound_value = _parse_float(bound)
        seconds_value = _parse_float(seconds) if seconds.strip() else None
    except ValueError as exc:
        raise StorageError("Stored measures must be numeric") from exc
    return ResultRecord(
        experiment=experiment,
        knob=knob,
        value=value,
        measure=measure_value,
        bound=bound_value,
        passed=passed == "true",
        seconds=seconds_value,
    )


def load_records(path: Path) -> List[ResultRecord]:
    if not path.exists():
        return []
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            records: List[ResultRecord] = []
            for row in reader:
                if not row or all(not cell.strip() for cell in row):
                    continue
                if row[: len(CSV_HEADER)] == CSV_HEADER:
                    continue
                records.append(_deserialize_row(row))
    except StorageError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise StorageError(f"Failed to read results from {path}: {exc}") from exc
    return records


def _write_atomic(path: Path, rows: Iterable[List[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w", newline="", delete=False, encoding="utf-8", dir=str(path.parent)
    ) as tmp:
        tmp_path = Path(tmp.name)
        writer = csv.writer(tmp, lineterminator="\n")
        for row in rows:
            writer.writerow(row)
    tmp_path.replace(path)


def save_records(path: Path, records: Iterable[ResultRecord]) -> None:
    rows = [CSV_HEADER] + [_serialize_record(record) for record in records]
    _write_atomic(path, rows)


def save_cloud(path: Path, cloud: PointCloud) -> None:
    """Dump a cloud as ``member,site,re,im`` lines, one per point entry."""

    half = (cloud.dimension - 1) // 2

    def rows() -> Iterable[List[str]]:
        yield CLOUD_HEADER
        for member, point in enumerate(cloud.points):
            for index, value in enumerate(point):
                yield [str(member), str(index - half), format_float(value.real), format_float(value.imag)]

    _write_atomic(path, rows())


__all__ = [
    "CLOUD_HEADER",
    "CSV_HEADER",
    "StorageError",
    "format_float",
    "load_records",
    "save_cloud",
    "save_records",
]
