"""Exhaustive cross-validated grid search over boosting hyperparameters.

Trials are independent: each gets a seed derived from (grid seed, trial
index), so the search output is a pure function of the data and the spec
regardless of worker count or scheduling. Wall times are recorded but
deliberately kept out of the deterministic results CSV.
"""

from __future__ import annotations

import csv
import io
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .data import Table, kfold
from .errors import ComputationError, ConfigError
from .models import GbmParams, rmse, train_gbm

_GBM_FIELDS = {f.name for f in dc_fields(GbmParams)}

#: Default sweep bracketing the reference car-insurance experiments;
#: 4 * 4 * 3 * 3 * 4 = 576 configurations.
DEFAULT_GRID_VALUES = {
    "learning_rate": [0.01, 0.05, 0.1, 0.3],
    "max_depth": [1, 3, 5, 7],
    "min_node_size": [1, 3, 5],
    "col_sample": [0.8, 0.9, 1.0],
    "row_subsample": [0.75, 0.8, 0.9, 1.0],
}


@dataclass(frozen=True)
class GridSpec:
    """Value lists per GbmParams field, expanded as a cartesian product."""

    values: dict[str, list]
    k_folds: int = 5
    seed: int = 0
    metric: str = "rmse"
    base: GbmParams = field(default_factory=GbmParams)

    def __post_init__(self):
        unknown = set(self.values) - _GBM_FIELDS
        if unknown:
            raise ConfigError(f"grid lists unknown GbmParams fields: {sorted(unknown)}")
        for name, vals in self.values.items():
            if not vals:
                raise ConfigError(f"empty value list for grid parameter {name!r}")
        if "seed" in self.values:
            raise ConfigError("per-trial seeds are derived; do not grid over 'seed'")
        if self.metric != "rmse":
            raise ConfigError(f"unsupported metric {self.metric!r}")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be >= 2")

    @property
    def size(self) -> int:
        out = 1
        for vals in self.values.values():
            out *= len(vals)
        return out


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    params: GbmParams
    cv_metric: float
    per_fold_metrics: tuple[float, ...]
    best_iteration: int
    wall_time: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def expand_grid(spec: GridSpec) -> list[GbmParams]:
    """Cartesian product in declaration order (last axis varies fastest)."""
    names = list(spec.values)
    combos = itertools.product(*(spec.values[n] for n in names))
    return [spec.base.replace(**dict(zip(names, combo))) for combo in combos]


def trial_seed(grid_seed: int, trial_index: int) -> int:
    """Stable per-trial seed; independent of execution order."""
    ss = np.random.SeedSequence([grid_seed, trial_index])
    return int(ss.generate_state(1)[0])


def evaluate_trial(
    train: Table,
    target: str,
    params: GbmParams,
    folds: list[tuple[np.ndarray, np.ndarray]],
    trial_index: int = 0,
) -> TrialResult:
    """Train on each fold, score validation at every boosting stage, and
    pick the stage minimizing the mean validation metric."""
    start = time.perf_counter()
    metric_matrix = np.empty((len(folds), params.n_trees))
    for fold_i, (tr_idx, val_idx) in enumerate(folds):
        try:
            model = train_gbm(train.subset_rows(tr_idx), target, params)
            val = train.subset_rows(val_idx)
            truth = val.column(target).values.astype(np.float64)
            for stage, preds in enumerate(model.staged_predict(val)):
                metric_matrix[fold_i, stage] = rmse(preds, truth)
        except Exception as exc:
            raise ComputationError(f"fold {fold_i}: {exc}") from exc
    stage_means = metric_matrix.mean(axis=0)
    best = int(np.argmin(stage_means))
    per_fold = tuple(float(v) for v in metric_matrix[:, best])
    return TrialResult(
        trial_index=trial_index,
        params=params,
        cv_metric=float(np.mean(metric_matrix[:, best])),
        per_fold_metrics=per_fold,
        best_iteration=best + 1,
        wall_time=time.perf_counter() - start,
    )


def _run_trial(args) -> TrialResult:
    train, target, params, folds, index = args
    try:
        return evaluate_trial(train, target, params, folds, trial_index=index)
    except Exception as exc:
        return TrialResult(
            trial_index=index,
            params=params,
            cv_metric=float("nan"),
            per_fold_metrics=(),
            best_iteration=0,
            wall_time=0.0,
            error=str(exc),
        )


def search(
    train: Table,
    target: str,
    spec: GridSpec,
    workers: int = 1,
) -> list[TrialResult]:
    """Evaluate every grid point; failures are recorded in place.

    Results come back in grid order whatever the completion order, and the
    metric values are identical for any worker count.
    """
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    grid = expand_grid(spec)
    folds = kfold(train, spec.k_folds, seed=spec.seed)
    tasks = [
        (train, target, params.replace(seed=trial_seed(spec.seed, i)), folds, i)
        for i, params in enumerate(grid)
    ]
    if workers == 1:
        return [_run_trial(t) for t in tasks]
    results: list[TrialResult | None] = [None] * len(tasks)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(_run_trial, tasks):
            results[res.trial_index] = res
    return results  # type: ignore[return-value]


def best_trial(results: list[TrialResult]) -> TrialResult:
    """Minimum cv metric; ties go to the earliest grid point."""
    if not results:
        raise ConfigError("no trial results")
    ok = [r for r in results if not r.failed]
    if not ok:
        raise ComputationError("all trials failed")
    best = ok[0]
    for r in ok[1:]:
        if r.cv_metric < best.cv_metric:
            best = r
    return best


# ---------------------------------------------------------------------------
# Result serialization

_PARAM_COLUMNS = [
    "n_trees", "learning_rate", "max_depth", "min_node_size",
    "col_sample", "row_subsample", "loss", "seed",
]


def results_to_csv(results: list[TrialResult], include_timing: bool = False) -> str:
    """One row per trial. Timing is opt-in so the default artifact is
    byte-identical across runs and worker counts."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["trial"] + _PARAM_COLUMNS + ["cv_metric", "best_iteration", "error"]
    if include_timing:
        header.append("wall_time")
    writer.writerow(header)
    for r in results:
        p = r.params.to_dict()
        row = [r.trial_index] + [_fmt(p[c]) for c in _PARAM_COLUMNS]
        row += [_fmt(r.cv_metric), r.best_iteration, r.error or ""]
        if include_timing:
            row.append(_fmt(r.wall_time))
        writer.writerow(row)
    return buf.getvalue()


def write_results_csv(results, path, include_timing: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(results_to_csv(results, include_timing=include_timing))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
