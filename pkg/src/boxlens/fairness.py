"""Group-conditioned classification metrics.

Beyond the usual confusion-matrix rates this reports two parity numbers:
`demographic_parity_paper` = TPR + TNR (an aggregate some references call
demographic parity), and `positive_rate`, the standard
fraction-predicted-positive definition. Metrics whose denominator is empty
are reported as None, never silently zeroed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, Table
from .errors import ConfigError, DataError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ConfigError("confusion counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn,
                               self.threshold)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "threshold": self.threshold}


def confusion(scores, truth, threshold: float) -> ConfusionMatrix:
    """Counts from thresholding scores at >= threshold."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if s.shape != t.shape or s.ndim != 1:
        raise DataError(f"scores and truth must be equal-length 1-D, got {s.shape} vs {t.shape}")
    if not np.isin(t, (0.0, 1.0)).all():
        raise DataError("truth must be binary 0/1")
    pred = s >= threshold
    pos = t == 1.0
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        threshold=float(threshold),
    )


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation; 0 by convention when a denominator factor is 0."""
    tp, fp, tn, fn = (float(cm.tp), float(cm.fp), float(cm.tn), float(cm.fn))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / np.sqrt(denom)


def roc_auc(scores, truth) -> tuple[tuple[tuple[float, float], ...], float]:
    """ROC points over distinct descending thresholds plus trapezoid AUC.

    Tied scores collapse into one point, so the AUC equals the
    Mann-Whitney statistic with ties counted half.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if s.shape != t.shape or s.ndim != 1:
        raise DataError("scores and truth must be equal-length 1-D")
    if not np.isin(t, (0.0, 1.0)).all():
        raise DataError("truth must be binary 0/1")
    n_pos = int(np.sum(t == 1.0))
    n_neg = len(t) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC/AUC undefined: truth has a single class")

    order = np.argsort(-s, kind="stable")
    sorted_scores = s[order]
    tps = np.cumsum(t[order])
    fps = np.cumsum(1.0 - t[order])
    # last index of each tie group
    last = np.flatnonzero(np.diff(sorted_scores) != 0)
    idx = np.concatenate([last, [len(s) - 1]])
    tpr = np.concatenate([[0.0], tps[idx] / n_pos])
    fpr = np.concatenate([[0.0], fps[idx] / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    curve = tuple((float(x), float(y)) for x, y in zip(fpr, tpr))
    return curve, auc


@dataclass(frozen=True)
class GroupMetrics:
    """Metrics for one subgroup; None marks an undefined value."""

    n: int
    cm: ConfusionMatrix
    tpr: float | None
    tnr: float | None
    fpr: float | None
    fnr: float | None
    accuracy: float | None
    precision: float | None
    npv: float | None
    demographic_parity_paper: float | None  # TPR + TNR
    positive_rate: float | None  # standard demographic parity
    mcc: float | None
    auc: float | None
    roc: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "confusion": self.cm.to_dict(),
            "tpr": self.tpr, "tnr": self.tnr, "fpr": self.fpr, "fnr": self.fnr,
            "accuracy": self.accuracy, "precision": self.precision, "npv": self.npv,
            "demographic_parity_paper": self.demographic_parity_paper,
            "positive_rate": self.positive_rate,
            "mcc": self.mcc, "auc": self.auc,
            "roc": [list(p) for p in self.roc],
        }


def _rate(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def score_metrics(scores, truth, threshold: float) -> GroupMetrics:
    """All metrics for one set of scored rows."""
    cm = confusion(scores, truth, threshold)
    t = np.asarray(truth, dtype=np.float64)
    both_classes = 0 < int(np.sum(t == 1.0)) < len(t)
    if both_classes:
        roc, auc = roc_auc(scores, truth)
        phi: float | None = mcc(cm)
    else:
        roc, auc, phi = (), None, None
    tpr = _rate(cm.tp, cm.tp + cm.fn)
    tnr = _rate(cm.tn, cm.tn + cm.fp)
    parity = tpr + tnr if tpr is not None and tnr is not None else None
    return GroupMetrics(
        n=cm.n,
        cm=cm,
        tpr=tpr,
        tnr=tnr,
        fpr=_rate(cm.fp, cm.fp + cm.tn),
        fnr=_rate(cm.fn, cm.fn + cm.tp),
        accuracy=_rate(cm.tp + cm.tn, cm.n),
        precision=_rate(cm.tp, cm.tp + cm.fp),
        npv=_rate(cm.tn, cm.tn + cm.fn),
        demographic_parity_paper=parity,
        positive_rate=_rate(cm.tp + cm.fp, cm.n),
        mcc=phi,
        auc=auc,
        roc=roc,
    )


@dataclass(frozen=True)
class GroupFairnessReport:
    group_by: str
    threshold: float
    levels: tuple[str, ...]
    groups: tuple[GroupMetrics, ...]
    overall: GroupMetrics

    def group(self, level: str) -> GroupMetrics:
        return self.groups[self.levels.index(level)]

    def to_dict(self) -> dict:
        return {
            "group_by": self.group_by,
            "threshold": self.threshold,
            "overall": self.overall.to_dict(),
            "groups": {lvl: g.to_dict() for lvl, g in zip(self.levels, self.groups)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def group_fairness_from_scores(
    scores,
    truth,
    groups,
    group_by: str = "group",
    threshold: float = 0.5,
) -> GroupFairnessReport:
    """Metrics per group label plus the pooled overall block."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    g = np.asarray(groups)
    if not len(s) == len(t) == len(g):
        raise DataError("scores, truth and groups must be equal length")
    levels = []
    for lvl in g:
        if lvl not in levels:
            levels.append(lvl)
    per_group = []
    for lvl in levels:
        mask = g == lvl
        per_group.append(score_metrics(s[mask], t[mask], threshold))
    overall = score_metrics(s, t, threshold)
    return GroupFairnessReport(
        group_by=group_by,
        threshold=float(threshold),
        levels=tuple(str(lvl) for lvl in levels),
        groups=tuple(per_group),
        overall=overall,
    )


def group_fairness(
    model,
    data: Table,
    target: str,
    group_by: str,
    threshold: float = 0.5,
) -> GroupFairnessReport:
    """Score the table with the model and split the metrics by one
    categorical feature (level order = dataset appearance order)."""
    gcol = data.column(group_by)
    if gcol.kind != CATEGORICAL:
        raise ConfigError(
            f"group_by column {group_by!r} is numeric; bin it into a "
            "categorical column first"
        )
    if gcol.missing_mask.any():
        raise DataError(f"group column {group_by!r} has missing values; impute first")
    truth = data.column(target).values.astype(np.float64)
    scores = model.predict(data)
    groups = np.array(gcol.decoded())
    report = group_fairness_from_scores(scores, truth, groups, group_by, threshold)
    # keep dataset level order even for levels unseen in predictions
    order = [lvl for lvl in gcol.levels if lvl in report.levels]
    idx = [report.levels.index(lvl) for lvl in order]
    return GroupFairnessReport(
        group_by=report.group_by,
        threshold=report.threshold,
        levels=tuple(order),
        groups=tuple(report.groups[i] for i in idx),
        overall=report.overall,
    )


# ---------------------------------------------------------------------------
# CSV emitters

_METRIC_COLUMNS = [
    "n", "tp", "fp", "tn", "fn", "tpr", "tnr", "fpr", "fnr", "accuracy",
    "precision", "npv", "demographic_parity_paper", "positive_rate", "mcc", "auc",
]


def metrics_to_csv(report: GroupFairnessReport) -> str:
    """Per-group metric table; undefined cells are left empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group"] + _METRIC_COLUMNS)
    for lvl, g in list(zip(report.levels, report.groups)) + [("__overall__", report.overall)]:
        row = [lvl, g.n, g.cm.tp, g.cm.fp, g.cm.tn, g.cm.fn]
        for name in _METRIC_COLUMNS[5:]:
            v = getattr(g, name)
            row.append("" if v is None else repr(float(v)))
        writer.writerow(row)
    return buf.getvalue()


def roc_to_csv(report: GroupFairnessReport) -> str:
    """Long format for plotting: group, fpr, tpr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group", "fpr", "tpr"])
    for lvl, g in zip(report.levels, report.groups):
        for x, y in g.roc:
            writer.writerow([lvl, repr(x), repr(y)])
    return buf.getvalue()


def write_fairness_csvs(report: GroupFairnessReport, metrics_path, roc_path) -> None:
    with open(metrics_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(metrics_to_csv(report))
    with open(roc_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(roc_to_csv(report))
