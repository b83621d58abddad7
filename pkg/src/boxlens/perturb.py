"""Perturbation machinery shared by the local explainers.

Neighbours of an instance are drawn feature-by-feature from the background
table's marginal distributions (bootstrap of observed values). Rule
predicates can condition the draw by restricting each feature's value pool
to satisfying values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, NUMERIC, Column, Table
from .errors import ConfigError, DataError, SchemaError

RELATIONS = ("==", "<=", ">", "in")


@dataclass(frozen=True)
class Predicate:
    """One test on one feature: equality, a half-line, or a closed interval."""

    feature: str
    relation: str  # one of RELATIONS
    value: object  # level string, float, or (low, high) pair for "in"

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ConfigError(f"unknown relation {self.relation!r}")
        if self.relation == "in":
            lo, hi = self.value
            if not lo <= hi:
                raise ConfigError(f"empty interval ({lo}, {hi})")

    def mask(self, column: Column) -> np.ndarray:
        """Boolean satisfaction per row; missing never satisfies."""
        if column.kind == CATEGORICAL:
            if self.relation != "==":
                raise ConfigError(
                    f"categorical predicate on {self.feature!r} must use '=='"
                )
            return column.values == column.code_of(self.value)
        v = column.values
        with np.errstate(invalid="ignore"):
            if self.relation == "==":
                out = v == float(self.value)
            elif self.relation == "<=":
                out = v <= float(self.value)
            elif self.relation == ">":
                out = v > float(self.value)
            else:
                lo, hi = self.value
                out = (v >= float(lo)) & (v <= float(hi))
        return out & ~column.missing_mask

    def mask_values(self, values: np.ndarray, column: Column) -> np.ndarray:
        """Satisfaction over a raw value array encoded like `column`."""
        return self.mask(column.replace_values(values))

    def holds(self, cell, column: Column) -> bool:
        return bool(self.mask_values(np.array([_encode_cell(cell, column)]), column)[0])

    def describe(self) -> str:
        if self.relation == "in":
            lo, hi = self.value
            return f"{self.feature} in [{lo:g}, {hi:g}]"
        if self.relation == "==":
            return f"{self.feature} == {self.value}"
        return f"{self.feature} {self.relation} {self.value:g}"

    def to_dict(self) -> dict:
        value = list(self.value) if self.relation == "in" else self.value
        return {"feature": self.feature, "relation": self.relation, "value": value}

    @classmethod
    def from_dict(cls, doc: dict) -> "Predicate":
        value = doc["value"]
        if doc["relation"] == "in":
            value = (float(value[0]), float(value[1]))
        return cls(doc["feature"], doc["relation"], value)


def _encode_cell(cell, column: Column):
    if column.kind == CATEGORICAL:
        return column.code_of(cell)
    return float(cell)


def rule_mask(table: Table, predicates) -> np.ndarray:
    """Rows of `table` satisfying every predicate."""
    out = np.ones(table.n_rows, dtype=bool)
    for p in predicates:
        out &= p.mask(table.column(p.feature))
    return out


def feature_names_of(model, background: Table) -> tuple[str, ...]:
    """Features the model consumes; falls back to all background columns."""
    schema = getattr(model, "schema", None)
    if schema is not None:
        return tuple(s.name for s in schema)
    names = getattr(model, "feature_names", None)
    if names is not None:
        return tuple(names)
    return background.names


def instance_table(background: Table, instance: dict, features) -> Table:
    """A 1-row table carrying the instance, encoded with background levels."""
    cols = []
    for name in features:
        c = background.column(name)
        if name not in instance:
            raise SchemaError(f"instance is missing feature {name!r}")
        cell = instance[name]
        if cell is None:
            raise DataError(f"instance has a missing value for {name!r}")
        if c.kind == CATEGORICAL:
            cols.append(Column(name, CATEGORICAL, np.array([c.code_of(cell)]),
                               np.zeros(1, dtype=bool), c.levels))
        else:
            cols.append(Column.numeric(name, [float(cell)]))
    return Table(tuple(cols))


@dataclass(frozen=True)
class PerturbationSampler:
    """Draws schema-respecting samples from background marginals."""

    background: Table
    features: tuple[str, ...]

    def pools(self, predicates=()) -> dict[str, np.ndarray]:
        """Per-feature candidate values after conditioning."""
        by_feature: dict[str, list[Predicate]] = {}
        for p in predicates:
            by_feature.setdefault(p.feature, []).append(p)
        out = {}
        for name in self.features:
            col = self.background.column(name)
            pool = col.observed()
            if len(pool) == 0:
                raise DataError(f"column {name!r} has no observed values to sample")
            for p in by_feature.get(name, ()):
                pool = pool[p.mask_values(pool, col)]
            if len(pool) == 0:
                parts = ", ".join(p.describe() for p in by_feature[name])
                raise DataError(f"no background values satisfy: {parts}")
            out[name] = pool
        return out

    def sample(self, n: int, rng: np.random.Generator, predicates=()) -> Table:
        """n independent rows; each cell bootstrapped from its pool."""
        if n < 1:
            raise ConfigError("sample size must be >= 1")
        pools = self.pools(predicates)
        cols = []
        for name in self.features:
            col = self.background.column(name)
            pool = pools[name]
            draw = pool[rng.integers(0, len(pool), size=n)]
            cols.append(Column(name, col.kind, draw.astype(col.values.dtype),
                               np.zeros(n, dtype=bool), col.levels))
        return Table(tuple(cols))


def gower_distance(samples: Table, instance: Table, features, background: Table) -> np.ndarray:
    """Mean per-feature dissimilarity in [0, 1].

    Numeric features contribute |difference| / background range (0 when the
    range collapses); categoricals contribute 0/1 mismatch.
    """
    parts = []
    for name in features:
        col = samples.column(name)
        ref = instance.column(name)
        if col.kind == NUMERIC:
            span = float(np.ptp(background.column(name).observed()))
            d = np.abs(col.values - ref.values[0])
            parts.append(d / span if span > 0 else np.zeros(len(d)))
        else:
            parts.append((col.values != ref.values[0]).astype(np.float64))
    return np.mean(parts, axis=0)
