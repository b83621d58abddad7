"""Shapley-value attributions with an interventional value function.

The value of a coalition S is the mean model output over the background
table with the instance's values spliced in on S. Exact enumeration is
kept for up to 12 features; beyond that the sampled-permutation estimator
reports per-feature standard errors.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .data import Table
from .errors import ConfigError
from .perturb import feature_names_of, instance_table

EXACT_LIMIT = 12


@dataclass(frozen=True)
class ShapleyAttribution:
    instance_index: int
    features: tuple[str, ...]
    values: tuple[float, ...]
    baseline: float  # mean prediction over the background
    full_value: float  # value of the complete coalition
    method: str  # "exact" | "monte_carlo"
    n_samples: int
    stderr: tuple[float, ...] = ()

    @property
    def efficiency_gap(self) -> float:
        return abs(sum(self.values) - (self.full_value - self.baseline))

    def to_dict(self) -> dict:
        return {
            "method": f"shapley_{self.method}",
            "instance_index": self.instance_index,
            "features": list(self.features),
            "values": list(self.values),
            "baseline": self.baseline,
            "full_value": self.full_value,
            "n_samples": self.n_samples,
            "stderr": list(self.stderr),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature", "phi", "stderr"])
        err = self.stderr or (float("nan"),) * len(self.features)
        for f, v, s in zip(self.features, self.values, err):
            writer.writerow([f, repr(v), repr(s)])
        return buf.getvalue()


def _splice(background: Table, instance: Table, names) -> Table:
    """Background rows with the instance's values forced on `names`."""
    out = background
    for name in names:
        col = background.column(name)
        fill = np.full(background.n_rows, instance.column(name).values[0],
                       dtype=col.values.dtype)
        out = out.replace_column(col.replace_values(fill))
    return out


def shapley_exact(
    model,
    background: Table,
    instance: dict,
    features: tuple[str, ...] | None = None,
    instance_index: int = -1,
) -> ShapleyAttribution:
    """Classical Shapley values by full coalition enumeration."""
    if features is None:
        features = feature_names_of(model, background)
    d = len(features)
    if d == 0:
        raise ConfigError("need at least one feature")
    if d > EXACT_LIMIT:
        raise ConfigError(
            f"{d} features means 2^{d} coalitions; use shapley_mc instead"
        )
    inst = instance_table(background, instance, features)

    value = np.empty(1 << d)
    for mask in range(1 << d):
        names = [features[i] for i in range(d) if mask >> i & 1]
        value[mask] = float(np.mean(model.predict(_splice(background, inst, names))))

    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    for mask in range(1 << d):
        s = bin(mask).count("1")
        weight = fact[s] * fact[d - s - 1] / fact[d]
        for i in range(d):
            if not mask >> i & 1:
                phi[i] += weight * (value[mask | 1 << i] - value[mask])

    return ShapleyAttribution(
        instance_index=instance_index,
        features=tuple(features),
        values=tuple(float(p) for p in phi),
        baseline=float(value[0]),
        full_value=float(value[(1 << d) - 1]),
        method="exact",
        n_samples=1 << d,
    )


def shapley_mc(
    model,
    background: Table,
    instance: dict,
    n_samples: int,
    features: tuple[str, ...] | None = None,
    seed: int = 0,
    instance_index: int = -1,
) -> ShapleyAttribution:
    """Sampled-permutation estimator.

    Each sample draws a feature ordering and one background row, then walks
    the ordering swapping instance values in; the prediction deltas are
    unbiased marginal contributions. stderr is the per-feature standard
    error over samples.
    """
    if features is None:
        features = feature_names_of(model, background)
    d = len(features)
    if d == 0:
        raise ConfigError("need at least one feature")
    if n_samples < 10:
        raise ConfigError("n_samples must be >= 10")
    inst = instance_table(background, instance, features)
    rng = np.random.default_rng(seed)

    orders = np.argsort(rng.random((n_samples, d)), axis=1)
    rows = rng.integers(0, background.n_rows, size=n_samples)
    # rank[s, f]: position of feature f in sample s's ordering
    rank = np.empty_like(orders)
    np.put_along_axis(rank, orders, np.arange(d)[None, :].repeat(n_samples, 0), axis=1)

    # step p in 0..d: features with rank < p take the instance's value
    steps = []
    for p in range(d + 1):
        cols = []
        for fi, name in enumerate(features):
            col = background.column(name)
            base = col.values[rows]
            use_inst = rank[:, fi] < p
            vals = np.where(use_inst, inst.column(name).values[0], base)
            cols.append(col.replace_values(vals.astype(col.values.dtype)))
        steps.append(model.predict(Table(tuple(cols))))
    preds = np.column_stack(steps)  # (n_samples, d + 1)

    deltas = np.diff(preds, axis=1)  # contribution of the feature at each step
    contrib = np.empty((n_samples, d))
    np.put_along_axis(contrib, orders, deltas, axis=1)

    phi = contrib.mean(axis=0)
    stderr = contrib.std(axis=0, ddof=1) / np.sqrt(n_samples)

    baseline = float(np.mean(model.predict(background)))
    full = float(np.mean(model.predict(_splice(background, inst, features))))
    return ShapleyAttribution(
        instance_index=instance_index,
        features=tuple(features),
        values=tuple(float(p) for p in phi),
        baseline=baseline,
        full_value=full,
        method="monte_carlo",
        n_samples=n_samples,
        stderr=tuple(float(s) for s in stderr),
    )
