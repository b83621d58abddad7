"""Permutation variable importance: how much the error grows when a
feature's values are shuffled."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .data import Table
from .errors import ConfigError
from .models import rmse


@dataclass(frozen=True)
class ImportanceReport:
    target: str
    baseline: float
    features: tuple[str, ...]
    permuted: tuple[float, ...]
    importance: tuple[float, ...]
    ranks: tuple[int, ...]
    n_repeats: int
    seed: int

    def __post_init__(self):
        if sorted(self.ranks) != list(range(1, len(self.features) + 1)):
            raise ConfigError("ranks must be a permutation of 1..n_features")

    def top(self, k: int = 5) -> list[str]:
        order = np.argsort(self.ranks)
        return [self.features[i] for i in order[:k]]


def permutation_importance(
    model,
    data: Table,
    target: str,
    n_repeats: int = 5,
    seed: int = 0,
    features: tuple[str, ...] | None = None,
) -> ImportanceReport:
    """Shuffle one column at a time and measure the RMSE increase.

    importance = mean permuted RMSE - baseline RMSE, so a feature the model
    never consults scores exactly zero. Each (feature, repeat) pair draws
    its shuffle from its own seed, making the report independent of
    evaluation order.
    """
    if n_repeats < 1:
        raise ConfigError("n_repeats must be >= 1")
    if features is None:
        features = tuple(n for n in data.names if n != target)
    truth = data.column(target).values.astype(np.float64)
    baseline = rmse(model.predict(data), truth)

    n = data.n_rows
    permuted = []
    for fi, name in enumerate(features):
        col = data.column(name)
        scores = np.empty(n_repeats)
        for r in range(n_repeats):
            rng = np.random.default_rng(np.random.SeedSequence([seed, fi, r]))
            shuffled = col.take(rng.permutation(n))
            scores[r] = rmse(model.predict(data.replace_column(shuffled)), truth)
        permuted.append(float(scores.mean()))

    importance = tuple(p - baseline for p in permuted)
    order = np.argsort(-np.array(importance), kind="stable")
    ranks = np.empty(len(features), dtype=int)
    ranks[order] = np.arange(1, len(features) + 1)
    return ImportanceReport(
        target=target,
        baseline=float(baseline),
        features=features,
        permuted=tuple(permuted),
        importance=importance,
        ranks=tuple(int(r) for r in ranks),
        n_repeats=n_repeats,
        seed=seed,
    )


def importance_to_csv(report: ImportanceReport) -> str:
    """One row per feature, most important first."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "feature", "baseline_metric", "permuted_metric", "importance"])
    for i in np.argsort(report.ranks):
        writer.writerow([
            report.ranks[i],
            report.features[i],
            repr(report.baseline),
            repr(report.permuted[i]),
            repr(report.importance[i]),
        ])
    return buf.getvalue()


def write_importance_csv(report: ImportanceReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(importance_to_csv(report))
