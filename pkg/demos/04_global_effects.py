"""Global views of a fitted model: importance, PDP, ICE, ALE.

The dataset hides an interaction, which is exactly the case where the
PDP averages structure away and ICE/second-order ALE reveal it.
"""

from pathlib import Path

import numpy as np

from boxlens import (
    GbmParams,
    SyntheticSpec,
    ale_first_order,
    ale_second_order,
    bar_chart,
    generate,
    heatmap,
    ice,
    line_plot,
    pdp,
    permutation_importance,
    train_gbm,
    write_profile_csv,
    write_svg,
)

OUT = Path(__file__).parent / "demo-output" / "04_global_effects"
OUT.mkdir(parents=True, exist_ok=True)

table, _ = generate(SyntheticSpec("interaction", n_rows=2000, seed=5, noise=0.05))
model = train_gbm(table, "y", GbmParams(n_trees=200, learning_rate=0.1, max_depth=3))

report = permutation_importance(model, table, "y", n_repeats=5, seed=0)
print("permutation importance (rmse increase):")
for name in report.top(4):
    i = report.features.index(name)
    print(f"  {name}: {report.importance[i]:+.4f}")
write_svg(
    bar_chart(report.top(4), [report.importance[report.features.index(n)] for n in report.top(4)]),
    OUT / "importance.svg",
)

p = pdp(model, table, "x1", grid_size=15)
write_profile_csv(p, OUT / "pdp_x1.csv")
print(f"pdp(x1) spans {max(p.curves[0]) - min(p.curves[0]):.3f} "
      "(the mean slope ~0.5; the per-row slope, 0 to 1, is hidden)")

curves = ice(model, table, "x1", grid_size=15, sample=40, centered=True, seed=0)
xs = np.asarray(curves.grid, dtype=float)
series = [(str(cid), xs, row) for cid, row in zip(curves.curve_ids, np.asarray(curves.curves))]
write_svg(line_plot(series[:25], title="centered ICE: x1", rug=curves.rug), OUT / "ice_x1.svg")
print("ice slopes fan out with the row's x2 (shallow near 0, steep near 1); see ice_x1.svg")

a1 = ale_first_order(model, table, "x1", n_bins=12)
write_profile_csv(a1, OUT / "ale_x1.csv")

a2 = ale_second_order(model, table, ("x1", "x2"), n_bins=8)
write_profile_csv(a2, OUT / "ale2_x1_x2.csv")
write_svg(
    heatmap(np.asarray(a2.curves), np.asarray(a2.grid), np.asarray(a2.grid2),
            title="second-order ALE: x1 x x2"),
    OUT / "ale2_x1_x2.svg",
)
surface = np.asarray(a2.curves, dtype=float)
print(f"ale2 surface range {surface.min():+.3f} .. {surface.max():+.3f} "
      "(a saddle: the x1*x2 interaction)")
print(f"artifacts in {OUT}")
