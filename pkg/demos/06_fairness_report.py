"""Group fairness audit: find the subpopulation the model cannot serve.

The noise-group generator makes the label pure noise inside one group.
A per-group breakdown shows the overall AUC hiding a coin-flip segment.
"""

from pathlib import Path

import numpy as np

from boxlens import (
    GbmParams,
    SyntheticSpec,
    generate,
    group_fairness,
    line_plot,
    train_gbm,
    write_fairness_csvs,
    write_svg,
)

OUT = Path(__file__).parent / "demo-output" / "06_fairness_report"
OUT.mkdir(parents=True, exist_ok=True)

table, truth = generate(SyntheticSpec("noise-group", n_rows=4000, seed=6, noise=0.1))
model = train_gbm(
    table, "y", GbmParams(n_trees=150, learning_rate=0.1, max_depth=3, loss="logistic")
)

report = group_fairness(model, table, "y", "g", threshold=0.5)
print(f"overall: n={report.overall.n}, auc={report.overall.auc:.3f}")
for level, g in zip(report.levels, report.groups):
    auc = "undefined" if g.auc is None else f"{g.auc:.3f}"
    mcc = "undefined" if g.mcc is None else f"{g.mcc:+.3f}"
    print(f"  group {level}: n={g.n}, auc={auc}, mcc={mcc}, "
          f"tpr={g.tpr:.3f}, fpr={g.fpr:.3f}")
print(f"(generator says the uninformable group is {truth['noise_group']!r})")

write_fairness_csvs(report, OUT / "metrics.csv", OUT / "roc.csv")
series = []
for level, g in zip(report.levels, report.groups):
    if g.roc:
        pts = np.asarray(g.roc, dtype=float)
        series.append((level, pts[:, 0], pts[:, 1]))
series.append(("chance", np.array([0.0, 1.0]), np.array([0.0, 1.0])))
write_svg(line_plot(series, title="ROC by group"), OUT / "roc.svg")
print(f"artifacts in {OUT}")
