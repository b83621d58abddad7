"""Synthetic datasets with known ground truth.

Each generator returns a table plus a truth document describing the
generating function, so tests can check explanations against what the
data actually encodes. Stand-ins for any external benchmark CSV.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Column, Table, write_csv
from .errors import ConfigError

GENERATORS = ("linear", "step", "interaction", "correlated-pair", "noise-group")


@dataclass(frozen=True)
class SyntheticSpec:
    generator: str
    n_rows: int = 1000
    seed: int = 0
    noise: float = 0.1

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ConfigError(
                f"unknown generator {self.generator!r}; choose from {GENERATORS}"
            )
        if self.n_rows < 1:
            raise ConfigError("n_rows must be >= 1")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")


def generate(spec: SyntheticSpec) -> tuple[Table, dict]:
    """Build the table and its ground-truth sidecar document."""
    rng = np.random.default_rng(spec.seed)
    build = {
        "linear": _linear,
        "step": _step,
        "interaction": _interaction,
        "correlated-pair": _correlated_pair,
        "noise-group": _noise_group,
    }[spec.generator]
    table, truth = build(spec, rng)
    truth.update(
        generator=spec.generator,
        n_rows=spec.n_rows,
        seed=spec.seed,
        noise=spec.noise,
    )
    return table, truth


def _linear(spec: SyntheticSpec, rng) -> tuple[Table, dict]:
    """y = 3*x1 + 1*x2 + noise; x3, x4 carry no signal."""
    n = spec.n_rows
    x = {f"x{i}": rng.uniform(0.0, 1.0, n) for i in range(1, 5)}
    y = 3.0 * x["x1"] + 1.0 * x["x2"] + rng.normal(scale=spec.noise, size=n)
    cols = [Column.numeric(k, v) for k, v in x.items()]
    cols.append(Column.numeric("y", y))
    truth = {
        "target": "y",
        "kind": "regression",
        "coefficients": {"x1": 3.0, "x2": 1.0},
        "active_features": ["x1", "x2"],
        "description": "y = 3*x1 + 1*x2 + gaussian noise",
    }
    return Table(tuple(cols)), truth


def _step(spec: SyntheticSpec, rng) -> tuple[Table, dict]:
    """Binary y = 1[x1 > 0.5] with label flips at the noise rate; x2, x3
    and the categorical g are pure distractors."""
    n = spec.n_rows
    x1 = rng.uniform(0.0, 1.0, n)
    x2 = rng.uniform(0.0, 1.0, n)
    x3 = rng.normal(size=n)
    g = rng.choice(["a", "b"], size=n)
    y = (x1 > 0.5).astype(np.float64)
    flips = rng.random(n) < spec.noise
    y[flips] = 1.0 - y[flips]
    cols = (
        Column.numeric("x1", x1),
        Column.numeric("x2", x2),
        Column.numeric("x3", x3),
        Column.categorical("g", list(g), levels=("a", "b")),
        Column.numeric("y", y),
    )
    truth = {
        "target": "y",
        "kind": "classification",
        "rule": "y = 1 if x1 > 0.5 else 0",
        "threshold_feature": "x1",
        "threshold_value": 0.5,
        "label_flip_rate": spec.noise,
        "active_features": ["x1"],
        "description": "binary step on x1 with label-flip noise",
    }
    return Table(cols), truth


def _interaction(spec: SyntheticSpec, rng) -> tuple[Table, dict]:
    """y = x1*x2 + noise; x3 carries no signal."""
    n = spec.n_rows
    x1 = rng.uniform(0.0, 1.0, n)
    x2 = rng.uniform(0.0, 1.0, n)
    x3 = rng.uniform(0.0, 1.0, n)
    y = x1 * x2 + rng.normal(scale=spec.noise, size=n)
    cols = (
        Column.numeric("x1", x1),
        Column.numeric("x2", x2),
        Column.numeric("x3", x3),
        Column.numeric("y", y),
    )
    truth = {
        "target": "y",
        "kind": "regression",
        "interaction": ["x1", "x2"],
        "active_features": ["x1", "x2"],
        "description": "y = x1*x2 + gaussian noise",
    }
    return Table(cols), truth


def _correlated_pair(spec: SyntheticSpec, rng) -> tuple[Table, dict]:
    """x2 = 0.8*x1 + sqrt(1-0.64)*z so the pair's population r = 0.8."""
    n = spec.n_rows
    r = 0.8
    x1 = rng.normal(size=n)
    x2 = r * x1 + np.sqrt(1.0 - r * r) * rng.normal(size=n)
    y = x1 + x2 + rng.normal(scale=spec.noise, size=n)
    cols = (
        Column.numeric("x1", x1),
        Column.numeric("x2", x2),
        Column.numeric("y", y),
    )
    truth = {
        "target": "y",
        "kind": "regression",
        "pearson_r": r,
        "correlated_pair": ["x1", "x2"],
        "active_features": ["x1", "x2"],
        "description": "y = x1 + x2 with corr(x1, x2) = 0.8",
    }
    return Table(cols), truth


def _noise_group(spec: SyntheticSpec, rng) -> tuple[Table, dict]:
    """Binary y predictable from x1 in groups b and c; pure noise in a."""
    n = spec.n_rows
    g = rng.choice(["a", "b", "c"], size=n)
    x1 = rng.normal(size=n)
    y = (x1 > 0.0).astype(np.float64)
    flips = rng.random(n) < spec.noise
    y[flips] = 1.0 - y[flips]
    noise_rows = g == "a"
    y[noise_rows] = rng.integers(0, 2, int(noise_rows.sum())).astype(np.float64)
    cols = (
        Column.numeric("x1", x1),
        Column.categorical("g", list(g), levels=("a", "b", "c")),
        Column.numeric("y", y),
    )
    truth = {
        "target": "y",
        "kind": "classification",
        "group_column": "g",
        "noise_group": "a",
        "informative_groups": ["b", "c"],
        "active_features": ["x1"],
        "description": "y = 1[x1 > 0] except group a, where y is random",
    }
    return Table(cols), truth


def write_synthetic(spec: SyntheticSpec, csv_path, truth_path) -> None:
    """Emit the dataset CSV and its truth sidecar; bytes depend only on spec."""
    table, truth = generate(spec)
    write_csv(table, csv_path)
    with open(truth_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(truth, sort_keys=True, indent=2))
        fh.write("\n")
