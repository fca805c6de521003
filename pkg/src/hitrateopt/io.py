"""Task-stream CSV format and atomic result emission.

The task format is a UTF-8 CSV with LF line endings, ``.`` decimal
separator, and header ``t,x_1..x_D,y[,label][,hidden]``.  Floats are
written with the shortest round-tripping representation, so write ->
read -> write is byte-stable.

Result files are written atomically (temp file, then rename) and carry a
leading comment line naming the configuration hash and seed so any table
can be traced back to its run.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .simulate import LabeledDataset

__all__ = [
    "TaskSample",
    "write_task_csv",
    "read_task_csv",
    "samples_to_dataset",
    "atomic_write_text",
    "format_float",
]


@dataclass(frozen=True)
class TaskSample:
    """One production task as carried by the CSV format."""

    time: int
    covariates: np.ndarray
    quality: float
    label: int | None = None
    hidden: int | None = None


def format_float(value: float) -> str:
    """Shortest representation that round-trips through float()."""
    return repr(float(value))


def task_header(n_features: int, with_label: bool, with_hidden: bool) -> list[str]:
    header = ["t"] + [f"x_{i + 1}" for i in range(n_features)] + ["y"]
    if with_label:
        header.append("label")
    if with_hidden:
        header.append("hidden")
    return header


def write_task_csv(dataset: LabeledDataset, path) -> None:
    """Serialize a task stream; label/hidden columns kept when known."""
    with_label = bool(np.all(dataset.labels >= 1))
    with_hidden = bool(np.all(dataset.hidden >= 1))
    lines = [",".join(task_header(dataset.n_raw_features, with_label, with_hidden))]
    for i in range(len(dataset)):
        row = [str(int(dataset.time[i]))]
        row.extend(format_float(v) for v in dataset.x[i])
        row.append(format_float(dataset.y[i]))
        if with_label:
            row.append(str(int(dataset.labels[i])))
        if with_hidden:
            row.append(str(int(dataset.hidden[i])))
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_task_csv(path) -> list[TaskSample]:
    """Parse a task CSV into samples, reporting the row/column of errors."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        columns = _validate_header(path, header)
        n_features, has_label, has_hidden = columns
        samples = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}:{row_number}: expected {len(header)} fields, got {len(row)}"
                )
            samples.append(_parse_row(path, row_number, row, n_features,
                                      has_label, has_hidden))
    if not samples:
        raise ValidationError(f"{path}: no data rows")
    return samples


def _validate_header(path: Path, header: list[str]) -> tuple[int, bool, bool]:
    if not header or header[0] != "t":
        raise ValidationError(f"{path}: header must start with column 't'")
    n_features = 0
    pos = 1
    while pos < len(header) and header[pos] == f"x_{n_features + 1}":
        n_features += 1
        pos += 1
    if n_features == 0 or pos >= len(header) or header[pos] != "y":
        raise ValidationError(
            f"{path}: header must read t,x_1..x_D,y[,label][,hidden]; got {header}"
        )
    pos += 1
    has_label = pos < len(header) and header[pos] == "label"
    pos += 1 if has_label else 0
    has_hidden = pos < len(header) and header[pos] == "hidden"
    pos += 1 if has_hidden else 0
    if pos != len(header):
        raise ValidationError(f"{path}: unexpected trailing columns {header[pos:]}")
    return n_features, has_label, has_hidden


def _parse_row(path: Path, row_number: int, row: list[str], n_features: int,
               has_label: bool, has_hidden: bool) -> TaskSample:
    def parse(kind, text: str, column: str):
        try:
            return kind(text)
        except ValueError:
            raise ValidationError(
                f"{path}:{row_number}: column {column!r}: cannot parse {text!r}"
            ) from None

    time = parse(int, row[0], "t")
    covariates = np.array(
        [parse(float, row[1 + i], f"x_{i + 1}") for i in range(n_features)]
    )
    quality = parse(float, row[1 + n_features], "y")
    pos = 2 + n_features
    label = parse(int, row[pos], "label") if has_label else None
    hidden = parse(int, row[pos + (1 if has_label else 0)], "hidden") if has_hidden else None
    return TaskSample(time=time, covariates=covariates, quality=quality,
                      label=label, hidden=hidden)


def samples_to_dataset(samples: list[TaskSample]) -> LabeledDataset:
    """Pack samples into array form; unknown labels become 0."""
    if not samples:
        raise ValidationError("no samples to pack")
    return LabeledDataset(
        time=np.array([s.time for s in samples]),
        x=np.stack([s.covariates for s in samples]),
        y=np.array([s.quality for s in samples]),
        labels=np.array([s.label if s.label is not None else 0 for s in samples]),
        hidden=np.array([s.hidden if s.hidden is not None else 0 for s in samples]),
    )


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
