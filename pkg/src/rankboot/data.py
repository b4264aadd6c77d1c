"""Observed-data containers and CSV ingestion.

Two layouts are supported. ``INDEPENDENT_SAMPLES`` holds p separate samples
of possibly unequal size, one per ranked item (league-table data).
``MATRIX`` holds n observation vectors of length p, optionally with a
response vector (gene-expression style data). The resampling schemes that
are legal differ between the two, see :mod:`rankboot.resampling`.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError


class Layout(enum.Enum):
    INDEPENDENT_SAMPLES = "independent-samples"
    MATRIX = "matrix"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PopulationData:
    """Immutable observed data.

    Use :meth:`from_samples` or :meth:`from_matrix` rather than the raw
    constructor; they copy, convert to float64 and validate.
    """

    layout: Layout
    samples: tuple[np.ndarray, ...] | np.ndarray
    response: np.ndarray | None = None
    labels: tuple[str, ...] = field(default=())

    @classmethod
    def from_samples(cls, samples: Sequence[Sequence[float]],
                     labels: Sequence[str] | None = None) -> PopulationData:
        arrays = tuple(_frozen(np.asarray(s, dtype=np.float64).ravel()) for s in samples)
        if labels is None:
            labels = [f"item{j + 1}" for j in range(len(arrays))]
        data = cls(Layout.INDEPENDENT_SAMPLES, arrays, None, tuple(str(x) for x in labels))
        data.validate()
        return data

    @classmethod
    def from_matrix(cls, matrix, response=None,
                    labels: Sequence[str] | None = None) -> PopulationData:
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise ValidationError(f"matrix data must be 2-D, got shape {mat.shape}")
        if labels is None:
            labels = [f"item{j + 1}" for j in range(mat.shape[1])]
        resp = None if response is None else _frozen(np.asarray(response).ravel())
        data = cls(Layout.MATRIX, _frozen(mat), resp, tuple(str(x) for x in labels))
        data.validate()
        return data

    def validate(self) -> None:
        if self.p < 2:
            raise ValidationError(f"need at least 2 items to rank, got p={self.p}")
        if self.labels and len(self.labels) != self.p:
            raise ValidationError(f"{len(self.labels)} labels for {self.p} items")
        if self.layout is Layout.INDEPENDENT_SAMPLES:
            if self.response is not None:
                raise ValidationError("a response vector requires the matrix layout")
            for label, x in zip(self.labels, self.samples):
                if x.size < 2:
                    raise ValidationError(f"item {label} has fewer than 2 observations")
                if not np.all(np.isfinite(x)):
                    raise ValidationError(f"item {label} contains non-finite values")
        else:
            if self.n < 2:
                raise ValidationError(f"matrix data needs n >= 2 rows, got {self.n}")
            if not np.all(np.isfinite(self.samples)):
                raise ValidationError("matrix contains non-finite values")
            if self.response is not None:
                if self.response.size != self.n:
                    raise ValidationError(
                        f"response has length {self.response.size}, expected {self.n}")
                if not np.all(np.isfinite(self.response)):
                    raise ValidationError("response contains non-finite values")

    @property
    def p(self) -> int:
        if self.layout is Layout.MATRIX:
            return int(self.samples.shape[1])
        return len(self.samples)

    @property
    def n(self) -> int:
        """Row count; only meaningful for the matrix layout."""
        if self.layout is not Layout.MATRIX:
            raise ValidationError("n is defined for matrix data only; use sizes")
        return int(self.samples.shape[0])

    @property
    def sizes(self) -> np.ndarray:
        if self.layout is Layout.MATRIX:
            return np.full(self.p, self.samples.shape[0], dtype=np.int64)
        return np.array([x.size for x in self.samples], dtype=np.int64)

    def column(self, j: int) -> np.ndarray:
        """Observations for item ``j`` (0-based)."""
        if self.layout is Layout.MATRIX:
            return self.samples[:, j]
        return self.samples[j]

    def columns(self) -> list[np.ndarray]:
        return [self.column(j) for j in range(self.p)]


@dataclass(frozen=True)
class SampleSizeSummary:
    n_bar: float
    n_min: int
    n_max: int


def summarize_sizes(data: PopulationData) -> SampleSizeSummary:
    """Average, smallest and largest per-item sample size."""
    sizes = data.sizes
    # math.fsum keeps n_bar independent of item order
    return SampleSizeSummary(math.fsum(sizes.tolist()) / sizes.size,
                             int(sizes.min()), int(sizes.max()))


def _parse_float(cell: str, where: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ValidationError(f"non-numeric value {cell!r} at {where}") from None
    if not math.isfinite(value):
        raise ValidationError(f"non-finite value {cell!r} at {where}")
    return value


def load_long_csv(path: str | Path) -> PopulationData:
    """Read ``item,value`` rows into the independent-samples layout.

    Items keep their first-appearance order.
    """
    groups: dict[str, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["item", "value"]:
            raise ValidationError(f"{path}: expected header 'item,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            item = row[0].strip()
            groups.setdefault(item, []).append(_parse_float(row[1], f"{path}:{lineno}"))
    if not groups:
        raise ValidationError(f"{path}: no data rows")
    for item, values in groups.items():
        if len(values) < 2:
            raise ValidationError(f"item {item} has fewer than 2 observations")
    return PopulationData.from_samples(list(groups.values()), labels=list(groups))


def load_matrix_csv(path: str | Path, response_column: str | None = None) -> PopulationData:
    """Read one observation vector per row; the optional response column is split off."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if not header:
            raise ValidationError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}:{lineno}: ragged row with {len(row)} fields, header has {len(header)}")
            rows.append([_parse_float(c, f"{path}:{lineno}") for c in row])
    if len(rows) < 2:
        raise ValidationError(f"{path}: need at least 2 data rows, got {len(rows)}")
    mat = np.array(rows, dtype=np.float64)
    response = None
    labels = header
    if response_column is not None:
        if response_column not in header:
            raise ValidationError(f"{path}: response column {response_column!r} not in header")
        k = header.index(response_column)
        response = mat[:, k]
        mat = np.delete(mat, k, axis=1)
        labels = header[:k] + header[k + 1:]
    return PopulationData.from_matrix(mat, response=response, labels=labels)


def write_long_csv(data: PopulationData, path: str | Path) -> None:
    if data.layout is not Layout.INDEPENDENT_SAMPLES:
        raise ValidationError("long CSV output needs the independent-samples layout")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "value"])
        for label, x in zip(data.labels, data.samples):
            # repr round-trips float64 exactly
            w.writerows([label, repr(float(v))] for v in x)


def write_matrix_csv(data: PopulationData, path: str | Path,
                     response_column: str = "response") -> None:
    if data.layout is not Layout.MATRIX:
        raise ValidationError("matrix CSV output needs the matrix layout")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(data.labels)
        if data.response is not None:
            header.append(response_column)
        w.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.samples[i]]
            if data.response is not None:
                row.append(repr(float(data.response[i])))
            w.writerow(row)
