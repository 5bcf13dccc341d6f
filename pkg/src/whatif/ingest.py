"""Survey table loading, schema application and cleaning."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InsufficientDataError, SchemaError, TableError

KINDS = ("likert7", "numeric", "categorical", "excluded")

Cell = Union[str, float, None]


@dataclass(frozen=True)
class RawTable:
    column_names: tuple[str, ...]
    cells: tuple[tuple[Cell, ...], ...]

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    def column(self, name: str) -> list[Cell]:
        j = self.column_names.index(name)
        return [row[j] for row in self.cells]


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    category: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown kind {self.kind!r} for column {self.name!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n x p numeric matrix with per-column specs.

    ``values`` holds NaN exactly where ``missing`` is set. ``provenance`` lists
    what cleaning steps removed, one item per entry.
    """

    values: np.ndarray
    missing: np.ndarray
    specs: tuple[VariableSpec, ...]
    standardized: bool = False
    provenance: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        missing = np.array(self.missing, dtype=bool, copy=True)
        if missing.shape != values.shape:
            raise ValueError("missing mask shape does not match values")
        if len(self.specs) != values.shape[1]:
            raise ValueError("one spec per column required")
        if any(s.kind == "excluded" for s in self.specs):
            raise ValueError("excluded specs cannot appear in a Dataset")
        if np.isnan(values[~missing]).any():
            raise ValueError("NaN found outside the missing mask")
        values[missing] = np.nan
        values.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def complete(self) -> bool:
        return not self.missing.any()

    def index(self, name: str) -> int:
        return self.names.index(name)

    def select(self, names: Sequence[str]) -> "Dataset":
        idx = [self.index(nm) for nm in names]
        return replace(
            self,
            values=self.values[:, idx],
            missing=self.missing[:, idx],
            specs=tuple(self.specs[i] for i in idx),
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.specs == other.specs
            and self.standardized == other.standardized
            and self.provenance == other.provenance
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None


def _parse_cell(text: str) -> Cell:
    text = text.strip()
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        return text
    return value if math.isfinite(value) else text


def load_table(path: str | Path) -> RawTable:
    """Read a comma- or tab-delimited UTF-8 table with a header row.

    Leading lines starting with ``#`` are skipped, so artifact files written
    by this package load back directly.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise TableError(f"cannot read table {path}: {exc}") from exc
    lines = text.splitlines(keepends=True)
    skipped = 0
    while skipped < len(lines) and lines[skipped].startswith("#"):
        skipped += 1
    if skipped == len(lines):
        raise TableError(f"table {path} has no header row")
    header_line = lines[skipped]
    # question texts often contain commas, never tabs
    delimiter = "\t" if "\t" in header_line else ","
    reader = csv.reader(io.StringIO("".join(lines[skipped:])), delimiter=delimiter)
    rows = [r for r in reader]
    header = [h.strip() for h in rows[0]]
    seen = set()
    for name in header:
        if name in seen:
            raise TableError(f"duplicate column name {name!r} in {path}")
        seen.add(name)
    cells = []
    for k, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise TableError(
                f"ragged row {k} (line {skipped + k + 1}) in {path}: "
                f"expected {len(header)} cells, found {len(row)}"
            )
        cells.append(tuple(_parse_cell(c) for c in row))
    return RawTable(tuple(header), tuple(cells))


def load_schema(path: str | Path) -> list[VariableSpec]:
    """Read ``name = kind, category`` lines. Blank lines and ``#`` lines are ignored."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    specs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"{path}:{lineno}: expected 'name = kind, category'")
        name, rhs = line.rsplit("=", 1)
        kind, _, category = rhs.partition(",")
        specs.append(VariableSpec(name.strip(), kind.strip(), category.strip()))
    return specs


def format_schema(specs: Iterable[VariableSpec]) -> str:
    return "".join(f"{s.name} = {s.kind}, {s.category}\n" if s.category else f"{s.name} = {s.kind}\n" for s in specs)


def write_schema(specs: Iterable[VariableSpec], path: str | Path) -> None:
    Path(path).write_text(format_schema(specs), encoding="utf-8")


def apply_schema(table: RawTable, specs: Sequence[VariableSpec]) -> Dataset:
    """Type-code the table's columns; output columns follow ``specs`` order."""
    spec_names = [s.name for s in specs]
    if len(set(spec_names)) != len(spec_names):
        raise SchemaError("schema names a column more than once")
    missing_cols = [nm for nm in spec_names if nm not in table.column_names]
    unspecced = [nm for nm in table.column_names if nm not in spec_names]
    if missing_cols or unspecced:
        raise SchemaError(
            f"schema/table mismatch: not in table {missing_cols}, no spec for {unspecced}"
        )
    kept = [s for s in specs if s.kind != "excluded"]
    if not kept:
        raise SchemaError("empty dataset: every column is excluded")
    n = table.n_rows
    values = np.full((n, len(kept)), np.nan)
    for j, spec in enumerate(kept):
        col = table.column(spec.name)
        if spec.kind == "categorical":
            codes: dict = {}
            for i, cell in enumerate(col):
                if cell is not None:
                    values[i, j] = codes.setdefault(cell, len(codes))
            continue
        for i, cell in enumerate(col):
            if cell is None:
                continue
            if isinstance(cell, str):
                raise SchemaError(f"non-numeric value {cell!r} in {spec.kind} column {spec.name!r} row {i + 1}")
            if spec.kind == "likert7" and not (cell == int(cell) and 1 <= cell <= 7):
                raise SchemaError(f"likert7 column {spec.name!r} row {i + 1}: value {cell!r} outside 1..7")
            values[i, j] = cell
    dropped = tuple(f"excluded by schema: {s.name}" for s in specs if s.kind == "excluded")
    return Dataset(values, np.isnan(values), tuple(kept), provenance=dropped)


def complete_cases(
    data: Dataset, max_missing_fraction: float = 0.5, *, min_rows: int = 10, min_vars: int = 2
) -> Dataset:
    """Drop columns missing more than the given fraction, then rows with any gap."""
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ValueError("max_missing_fraction must lie in [0, 1]")
    log = list(data.provenance)
    frac = data.missing.mean(axis=0) if data.n else np.zeros(data.p)
    keep_cols = [j for j in range(data.p) if frac[j] <= max_missing_fraction]
    for j in range(data.p):
        if j not in keep_cols:
            log.append(f"column missing {frac[j]:.3f} > {max_missing_fraction}: {data.specs[j].name}")
    values = data.values[:, keep_cols]
    missing = data.missing[:, keep_cols]
    row_ok = ~missing.any(axis=1)
    for i in np.flatnonzero(~row_ok):
        log.append(f"row with missing values: {int(i) + 1}")
    values = values[row_ok]
    out_n, out_p = values.shape
    if out_n < min_rows or out_p < min_vars:
        raise InsufficientDataError(
            f"insufficient data after complete-case filtering: n={out_n}, p={out_p} "
            f"(need n >= {min_rows}, p >= {min_vars})"
        )
    return Dataset(
        values,
        np.zeros_like(values, dtype=bool),
        tuple(data.specs[j] for j in keep_cols),
        standardized=data.standardized,
        provenance=tuple(log),
    )


def zero_variance_columns(data: Dataset) -> list[str]:
    if not data.complete:
        raise ValueError("zero-variance check requires complete data")
    std = data.values.std(axis=0)
    scale = np.maximum(1.0, np.abs(data.values).max(axis=0, initial=0.0))
    return [data.specs[j].name for j in range(data.p) if std[j] <= 1e-12 * scale[j]]


def drop_zero_variance(data: Dataset) -> Dataset:
    """Remove constant columns, logging each in the provenance."""
    flat = zero_variance_columns(data)
    if not flat:
        return data
    warnings.warn(f"zero-variance columns excluded: {flat}", stacklevel=2)
    out = data.select([nm for nm in data.names if nm not in flat])
    return replace(out, provenance=data.provenance + tuple(f"zero variance: {nm}" for nm in flat))


def standardize(data: Dataset) -> Dataset:
    """Z-score each column (population variance); constant columns are dropped."""
    data = drop_zero_variance(data)
    mean = data.values.mean(axis=0)
    std = data.values.std(axis=0)
    return replace(data, values=(data.values - mean) / std, standardized=True)


def _format_value(v: float) -> str:
    if math.isnan(v):
        return ""
    if v.is_integer() and abs(v) < 2**53 and not (v == 0 and math.copysign(1.0, v) < 0):
        return str(int(v))
    return repr(v)


def format_table(data: Dataset, delimiter: str = "\t") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(data.names)
    for row in data.values:
        writer.writerow([_format_value(float(v)) for v in row])
    return buf.getvalue()


def write_table(data: Dataset, path: str | Path, delimiter: str = "\t", header: str = "") -> None:
    """Write the dataset as delimited text. Finite values reload bit-exactly."""
    text = format_table(data, delimiter)
    Path(path).write_text(header + text, encoding="utf-8")


def load_dataset(table_path: str | Path, schema_path: str | Path) -> Dataset:
    return apply_schema(load_table(table_path), load_schema(schema_path))
