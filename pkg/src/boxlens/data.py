"""Tabular data: typed columns, CSV ingestion, missingness, imputation, splits.

Tables are immutable after construction. Numeric columns are stored as
float64 with NaN in missing cells; categorical columns as int64 level
codes (-1 = missing) plus a level list frozen in first-appearance order.
Every operation returns new objects and is safe to call from concurrent
workers over shared tables.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, CsvParseError, DataError, SchemaError, UnimputableError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

#: Cell contents treated as missing (case-insensitive, whitespace-stripped).
DEFAULT_SENTINELS = ("", "na", "nan")


@dataclass(frozen=True, eq=False)
class Column:
    """One typed column: values plus an explicit missing mask."""

    name: str
    kind: str  # NUMERIC or CATEGORICAL
    values: np.ndarray  # float64 (numeric) or int64 codes (categorical)
    missing_mask: np.ndarray  # bool, same length as values
    levels: tuple[str, ...] = ()  # categorical only, first-appearance order

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if len(self.values) != len(self.missing_mask):
            raise SchemaError(f"column {self.name!r}: mask length != value length")
        self.values.setflags(write=False)
        self.missing_mask.setflags(write=False)

    @classmethod
    def numeric(cls, name: str, values, missing_mask=None) -> "Column":
        vals = np.asarray(values, dtype=np.float64).copy()
        if missing_mask is None:
            missing_mask = np.isnan(vals)
        mask = np.asarray(missing_mask, dtype=bool).copy()
        vals[mask] = np.nan
        return cls(name, NUMERIC, vals, mask)

    @classmethod
    def categorical(cls, name: str, cells: Sequence, levels=None) -> "Column":
        """Build from raw cells (strings or None); None marks missing."""
        if levels is None:
            levels = []
            for c in cells:
                if c is not None and c not in levels:
                    levels.append(c)
        levels = tuple(str(v) for v in levels)
        index = {lvl: i for i, lvl in enumerate(levels)}
        codes = np.full(len(cells), -1, dtype=np.int64)
        mask = np.zeros(len(cells), dtype=bool)
        for i, c in enumerate(cells):
            if c is None:
                mask[i] = True
            else:
                key = str(c)
                if key not in index:
                    raise SchemaError(f"value {key!r} not in levels of column {name!r}")
                codes[i] = index[key]
        return cls(name, CATEGORICAL, codes, mask, levels)

    @property
    def n_missing(self) -> int:
        return int(self.missing_mask.sum())

    def observed(self) -> np.ndarray:
        """Values at non-missing positions."""
        return self.values[~self.missing_mask]

    def cell(self, i: int):
        """Decoded cell: float, level string, or None when missing."""
        if self.missing_mask[i]:
            return None
        if self.kind == NUMERIC:
            return float(self.values[i])
        return self.levels[int(self.values[i])]

    def decoded(self) -> list:
        return [self.cell(i) for i in range(len(self.values))]

    def code_of(self, level: str) -> int:
        try:
            return self.levels.index(str(level))
        except ValueError:
            raise SchemaError(
                f"level {level!r} not among levels of column {self.name!r}"
            ) from None

    def take(self, indices: np.ndarray) -> "Column":
        return Column(
            self.name,
            self.kind,
            self.values[indices].copy(),
            self.missing_mask[indices].copy(),
            self.levels,
        )

    def replace_values(self, values: np.ndarray, missing_mask=None) -> "Column":
        if missing_mask is None:
            missing_mask = np.zeros(len(values), dtype=bool)
        dtype = np.float64 if self.kind == NUMERIC else np.int64
        return Column(
            self.name,
            self.kind,
            np.asarray(values, dtype=dtype).copy(),
            np.asarray(missing_mask, dtype=bool).copy(),
            self.levels,
        )

    def equals(self, other: "Column") -> bool:
        if (self.name, self.kind, self.levels) != (other.name, other.kind, other.levels):
            return False
        if not np.array_equal(self.missing_mask, other.missing_mask):
            return False
        ours, theirs = self.values[~self.missing_mask], other.values[~other.missing_mask]
        return np.array_equal(ours, theirs)


@dataclass(frozen=True, eq=False)
class Table:
    """Ordered collection of equal-length columns with unique names."""

    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")
        if any(not n for n in names):
            raise SchemaError("empty column name")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) > 1:
            raise SchemaError(f"columns have differing lengths: {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column named {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def subset_rows(self, indices) -> "Table":
        idx = np.asarray(indices, dtype=np.int64)
        return Table(tuple(c.take(idx) for c in self.columns))

    def replace_column(self, column: Column) -> "Table":
        if not self.has_column(column.name):
            raise SchemaError(f"no column named {column.name!r}")
        return Table(tuple(column if c.name == column.name else c for c in self.columns))

    def with_constant(self, name: str, value) -> "Table":
        """Return a copy with one column forced to a constant value.

        For categorical columns ``value`` is a level string; for numeric a
        float. Used by the profile explainers to evaluate counterfactuals.
        """
        col = self.column(name)
        if col.kind == CATEGORICAL:
            fill = col.code_of(value)
        else:
            fill = float(value)
        values = np.full(self.n_rows, fill, dtype=col.values.dtype)
        return self.replace_column(col.replace_values(values))

    def row_dict(self, i: int) -> dict:
        return {c.name: c.cell(i) for c in self.columns}

    def drop(self, name: str) -> "Table":
        self.column(name)
        return Table(tuple(c for c in self.columns if c.name != name))

    def select(self, names: Sequence[str]) -> "Table":
        return Table(tuple(self.column(n) for n in names))

    def equals(self, other: "Table") -> bool:
        if self.names != other.names or self.n_rows != other.n_rows:
            return False
        return all(a.equals(b) for a, b in zip(self.columns, other.columns))

    def matrix(self, features: Sequence[str]) -> tuple[np.ndarray, list[str]]:
        """Encode columns into a float64 matrix (categoricals as level codes).

        Missing cells are not representable here; callers that cannot handle
        NaN/-1 must impute first.
        """
        cols, kinds = [], []
        for name in features:
            c = self.column(name)
            cols.append(c.values.astype(np.float64))
            kinds.append(c.kind)
        X = np.column_stack(cols) if cols else np.empty((self.n_rows, 0))
        return X, kinds


def from_rows(names: Sequence[str], kinds: Sequence[str], rows: Iterable[Sequence]) -> Table:
    """Assemble a Table from python row tuples (None = missing)."""
    cells = list(zip(*rows)) if rows else [[] for _ in names]
    if rows and len(cells) != len(names):
        raise SchemaError("row width does not match column count")
    cols = []
    for name, kind, col_cells in zip(names, kinds, cells or [[]] * len(names)):
        if kind == NUMERIC:
            vals = np.array(
                [np.nan if v is None else float(v) for v in col_cells], dtype=np.float64
            )
            cols.append(Column.numeric(name, vals))
        else:
            cols.append(Column.categorical(name, list(col_cells)))
    return Table(tuple(cols))


# ---------------------------------------------------------------------------
# CSV ingestion


def load_csv(
    path,
    schema: Mapping[str, str] | None = None,
    sentinels: Sequence[str] = DEFAULT_SENTINELS,
) -> Table:
    """Load an RFC-4180-style CSV with a header row into a Table.

    Columns are auto-typed: numeric when every non-missing cell parses as a
    number, categorical otherwise. ``schema`` overrides kinds per column.
    Empty cells and the sentinel strings (case-insensitive) are missing.
    """
    sentinel_set = {s.strip().lower() for s in sentinels}
    schema = dict(schema or {})
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
            if header is None:
                raise CsvParseError("empty file, no header row")
            if len(set(header)) != len(header):
                dupes = sorted({h for h in header if header.count(h) > 1})
                raise SchemaError(f"duplicate header columns: {dupes}")
            if any(not h.strip() for h in header):
                raise SchemaError("blank column name in header")
            raw: list[list[str | None]] = [[] for _ in header]
            for row in reader:
                if len(row) != len(header):
                    raise CsvParseError(
                        f"expected {len(header)} fields, got {len(row)}",
                        line=reader.line_num,
                    )
                for j, cell in enumerate(row):
                    raw[j].append(None if cell.strip().lower() in sentinel_set else cell)
        except csv.Error as exc:
            raise CsvParseError(str(exc), line=reader.line_num) from exc

    unknown = set(schema) - set(header)
    if unknown:
        raise SchemaError(f"schema overrides for unknown columns: {sorted(unknown)}")

    columns = []
    for name, cells in zip(header, raw):
        kind = schema.get(name) or _infer_kind(cells)
        if kind == NUMERIC:
            vals = np.empty(len(cells), dtype=np.float64)
            for i, cell in enumerate(cells):
                if cell is None:
                    vals[i] = np.nan
                else:
                    try:
                        vals[i] = float(cell)
                    except ValueError:
                        raise SchemaError(
                            f"column {name!r} forced numeric but cell "
                            f"{cell!r} does not parse"
                        ) from None
            columns.append(Column.numeric(name, vals))
        elif kind == CATEGORICAL:
            columns.append(Column.categorical(name, [c.strip() if c is not None else None for c in cells]))
        else:
            raise SchemaError(f"unknown kind {kind!r} in schema for {name!r}")
    return Table(tuple(columns))


def _infer_kind(cells: Sequence[str | None]) -> str:
    for cell in cells:
        if cell is None:
            continue
        try:
            float(cell)
        except ValueError:
            return CATEGORICAL
    return NUMERIC


def write_csv(table: Table, path) -> None:
    """Write a Table back out; missing cells become empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.names)
        for i in range(table.n_rows):
            row = []
            for c in table.columns:
                v = c.cell(i)
                row.append("" if v is None else (repr(v) if isinstance(v, float) else v))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Missingness


@dataclass(frozen=True)
class MissingnessReport:
    """Per-column and joint missingness counts for one table."""

    n_rows: int
    n_cols: int
    column_counts: dict[str, int]
    column_fractions: dict[str, float]
    overall_fraction: float
    # (tuple of jointly-missing column names) -> number of rows; includes
    # the fully-observed pattern under the empty tuple.
    patterns: dict[tuple[str, ...], int]

    def to_json(self) -> str:
        doc = {
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "column_counts": self.column_counts,
            "column_fractions": self.column_fractions,
            "overall_fraction": self.overall_fraction,
            "patterns": [
                {"columns": list(k), "n_rows": v}
                for k, v in sorted(self.patterns.items(), key=lambda kv: (-kv[1], kv[0]))
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def write_pattern_csv(self, path, column_order: Sequence[str]) -> None:
        """One row per co-missingness pattern: 0/1 per column plus row count."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(column_order) + ["n_rows"])
            ordered = sorted(self.patterns.items(), key=lambda kv: (-kv[1], kv[0]))
            for cols, count in ordered:
                missing = set(cols)
                writer.writerow([1 if c in missing else 0 for c in column_order] + [count])


def missingness(table: Table) -> MissingnessReport:
    counts = {c.name: c.n_missing for c in table.columns}
    n_rows, n_cols = table.n_rows, len(table.columns)
    fractions = {
        name: (cnt / n_rows if n_rows else 0.0) for name, cnt in counts.items()
    }
    total_cells = n_rows * n_cols
    overall = sum(counts.values()) / total_cells if total_cells else 0.0

    pattern_counts: Counter = Counter()
    if n_rows:
        masks = np.column_stack([c.missing_mask for c in table.columns])
        names = table.names
        for row_mask in masks:
            key = tuple(n for n, m in zip(names, row_mask) if m)
            pattern_counts[key] += 1
    return MissingnessReport(
        n_rows=n_rows,
        n_cols=n_cols,
        column_counts=counts,
        column_fractions=fractions,
        overall_fraction=overall,
        patterns=dict(pattern_counts),
    )


# ---------------------------------------------------------------------------
# Imputation


def impute(table: Table, strategy: str = "median_mode", seed: int = 0) -> Table:
    """Fill every missing cell; the input table is left untouched.

    ``median_mode`` uses the column median (numeric) or modal level
    (categorical). ``predictive`` fits a depth-3 tree per incomplete column
    on the fully-observed columns; columns the tree cannot reach fall back
    to median/mode. ``seed`` is reserved for stochastic strategies and does
    not affect the current deterministic ones.
    """
    if strategy not in ("median_mode", "predictive"):
        raise ConfigError(f"unknown imputation strategy {strategy!r}")
    for c in table.columns:
        if table.n_rows and c.n_missing == table.n_rows:
            raise UnimputableError(f"column {c.name!r} has no observed values")

    if strategy == "median_mode":
        return Table(tuple(_fill_median_mode(c) for c in table.columns))
    return _impute_predictive(table)


def _fill_median_mode(col: Column) -> Column:
    if col.n_missing == 0:
        return col.replace_values(col.values, col.missing_mask)
    vals = col.values.copy()
    if col.kind == NUMERIC:
        vals[col.missing_mask] = np.median(col.observed())
    else:
        codes = col.observed().astype(np.int64)
        fill = int(np.bincount(codes, minlength=len(col.levels)).argmax())
        vals[col.missing_mask] = fill
    return col.replace_values(vals)


def _impute_predictive(table: Table) -> Table:
    from . import trees  # deferred: trees has no dependency back on this module

    complete = [c.name for c in table.columns if c.n_missing == 0]
    incomplete = [c for c in table.columns if c.n_missing > 0]
    if not complete:
        return impute(table, "median_mode")

    X = _onehot_design(table, complete)
    out = {c.name: c for c in table.columns}
    for col in incomplete:
        obs = ~col.missing_mask
        vals = col.values.copy()
        if col.kind == NUMERIC:
            tree = trees.grow_regression_tree(
                X[obs], ["numeric"] * X.shape[1], col.values[obs], max_depth=3, min_node_size=5
            )
            vals[col.missing_mask] = trees.predict_tree(tree, X[col.missing_mask])
        else:
            tree = trees.grow_classification_tree(
                X[obs], col.values[obs].astype(np.int64), len(col.levels),
                max_depth=3, min_node_size=5,
            )
            vals[col.missing_mask] = trees.predict_tree(tree, X[col.missing_mask])
        out[col.name] = col.replace_values(vals)
    return Table(tuple(out[c.name] for c in table.columns))


def _onehot_design(table: Table, features: Sequence[str]) -> np.ndarray:
    blocks = []
    for name in features:
        c = table.column(name)
        if c.kind == NUMERIC:
            blocks.append(c.values.reshape(-1, 1))
        else:
            codes = c.values.astype(np.int64)
            eye = np.zeros((table.n_rows, len(c.levels)))
            seen = codes >= 0
            eye[np.nonzero(seen)[0], codes[seen]] = 1.0
            blocks.append(eye)
    return np.hstack(blocks) if blocks else np.empty((table.n_rows, 0))


# ---------------------------------------------------------------------------
# Splitting and folds


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0
    stratify_on: str | None = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0,1), got {self.train_fraction}")


def split(table: Table, spec: SplitSpec) -> tuple[Table, Table]:
    """Deterministic row-disjoint train/test partition."""
    n = table.n_rows
    if n < 2:
        raise DataError(f"cannot split a table with {n} rows")
    rng = np.random.default_rng(spec.seed)

    if spec.stratify_on is None:
        n_train = min(max(int(round(spec.train_fraction * n)), 1), n - 1)
        perm = rng.permutation(n)
        train_idx = np.sort(perm[:n_train])
        test_idx = np.sort(perm[n_train:])
    else:
        col = table.column(spec.stratify_on)
        if col.kind != CATEGORICAL:
            raise ConfigError(f"stratify_on column {col.name!r} must be categorical")
        train_parts, test_parts = [], []
        codes = col.values.astype(np.int64)
        codes = np.where(col.missing_mask, -1, codes)
        for code in np.unique(codes):
            level_idx = np.nonzero(codes == code)[0]
            k = int(round(spec.train_fraction * len(level_idx)))
            k = min(max(k, 0), len(level_idx))
            perm = rng.permutation(len(level_idx))
            train_parts.append(level_idx[perm[:k]])
            test_parts.append(level_idx[perm[k:]])
        train_idx = np.sort(np.concatenate(train_parts))
        test_idx = np.sort(np.concatenate(test_parts))
        if len(train_idx) == 0 or len(test_idx) == 0:
            raise DataError("stratified split left one side empty")
    return table.subset_rows(train_idx), table.subset_rows(test_idx)


def kfold(table: Table, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint, exhaustive folds with sizes differing by at most one."""
    n = table.n_rows
    if not 2 <= k <= n:
        raise ConfigError(f"k must satisfy 2 <= k <= n_rows ({n}), got {k}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    pairs = []
    for chunk in np.array_split(perm, k):
        val = np.sort(chunk)
        train = np.sort(np.setdiff1d(perm, chunk, assume_unique=True))
        pairs.append((train, val))
    return pairs
