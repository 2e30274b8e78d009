"""CSV loading and one-line summaries of observation tables."""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


def split_unit(column: str) -> tuple[str, str]:
    """``"d_um"`` -> ``("d", "um")``; columns without a suffix get ``"unknown"``."""
    name, sep, unit = column.partition("_")
    if sep and name and unit:
        return name, unit
    return column, "unknown"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """An ordered (x, y) table.

    ``extra`` carries additional per-row columns keyed by the name under
    which the expression DSL binds them (for example ``L`` for the Kuhn
    chain length).
    """

    x: np.ndarray
    y: np.ndarray
    x_name: str = "x"
    y_name: str = "y"
    x_unit: str = "unknown"
    y_unit: str = "unknown"
    source_path: str = ""
    extra: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        x, y = _frozen(self.x), _frozen(self.y)
        if x.ndim != 1 or x.shape != y.shape:
            raise DataError("x and y must be 1-D vectors of equal length")
        if x.size < 2:
            raise DataError(f"need at least 2 rows, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("all values must be finite")
        extra = {}
        for k, v in self.extra.items():
            v = _frozen(v)
            if v.shape != x.shape:
                raise DataError(f"column {k!r} has {v.size} rows, expected {x.size}")
            extra[k] = v
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "extra", extra)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def x_symbol(self) -> str:
        return split_unit(self.x_name)[0]

    @property
    def y_symbol(self) -> str:
        return split_unit(self.y_name)[0]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            self.x[idx], self.y[idx], self.x_name, self.y_name, self.x_unit, self.y_unit,
            self.source_path, {k: v[idx] for k, v in self.extra.items()},
        )

    def sort_order(self) -> np.ndarray:
        return np.argsort(self.x, kind="stable")

    def with_extra(self, **columns) -> "Dataset":
        return Dataset(
            self.x, self.y, self.x_name, self.y_name, self.x_unit, self.y_unit,
            self.source_path, {**self.extra, **columns},
        )


def load_csv(
    path: str | Path,
    x_column: str,
    y_column: str,
    extra_columns: Mapping[str, str] | None = None,
) -> Dataset:
    """Read a comma-delimited UTF-8 file with a header row.

    ``extra_columns`` maps DSL binding names to CSV column names. Rows are
    kept in file order. Blank lines at the end of the file are ignored; any
    other malformed row is an error naming its 1-based data-row number.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    extra_columns = dict(extra_columns or {})
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    while body and not any(c.strip() for c in body[-1]):
        body.pop()

    wanted = {"x": x_column, "y": y_column, **{f"extra:{k}": v for k, v in extra_columns.items()}}
    col_index = {}
    for key, col in wanted.items():
        if col not in header:
            raise DataError(f"{path}: missing column {col!r} (have {', '.join(header)})")
        col_index[key] = header.index(col)

    values: dict[str, list[float]] = {k: [] for k in wanted}
    for rownum, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}")
        for key, ci in col_index.items():
            cell = row[ci].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell {cell!r} in row {rownum}, column {wanted[key]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite cell {cell!r} in row {rownum}, column {wanted[key]!r}")
            values[key].append(v)
    if len(body) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(body)}")

    x_sym, x_unit = split_unit(x_column)
    y_sym, y_unit = split_unit(y_column)
    return Dataset(
        x=values["x"],
        y=values["y"],
        x_name=x_column,
        y_name=y_column,
        x_unit=x_unit,
        y_unit=y_unit,
        source_path=str(path),
        extra={k: values[f"extra:{k}"] for k in extra_columns},
    )


def fmt4(v: float) -> str:
    """Four significant digits."""
    return f"{v:#.4g}"


def summarize(d: Dataset) -> str:
    def rng(sym, unit, a):
        u = "" if unit == "unknown" else f" {unit}"
        return f"{sym} range: [{fmt4(a.min())}, {fmt4(a.max())}]{u}"

    return (
        f"{d.n} points. "
        f"{rng(d.x_symbol, d.x_unit, d.x)}, {rng(d.y_symbol, d.y_unit, d.y)}"
    )
