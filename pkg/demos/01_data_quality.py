"""Walk a messy CSV through inspection, imputation and splitting.

We fabricate a dataset, knock holes in it, then repair and partition it
the same way the CLI's inspect/impute/split subcommands would.
"""

from pathlib import Path

import numpy as np

from boxlens import (
    SplitSpec,
    SyntheticSpec,
    generate,
    impute,
    load_csv,
    missingness,
    split,
    write_csv,
)

OUT = Path(__file__).parent / "demo-output" / "01_data_quality"
OUT.mkdir(parents=True, exist_ok=True)

table, truth = generate(SyntheticSpec("linear", n_rows=600, seed=4, noise=0.2))
write_csv(table, OUT / "clean.csv")

# punch ~8% holes into two feature columns, re-read, and let the toolkit
# discover the damage on its own
rng = np.random.default_rng(0)
lines = (OUT / "clean.csv").read_text().splitlines()
header, rows = lines[0], lines[1:]
cols = header.split(",")
for j, name in enumerate(cols):
    if name not in ("x1", "x3"):
        continue
    for i in range(len(rows)):
        if rng.random() < 0.08:
            cells = rows[i].split(",")
            cells[j] = ""
            rows[i] = ",".join(cells)
(OUT / "messy.csv").write_text("\n".join([header] + rows) + "\n")

messy = load_csv(OUT / "messy.csv")
report = missingness(messy)
print(f"rows: {report.n_rows}, overall missing fraction: {report.overall_fraction:.3f}")
for name, count in report.column_counts.items():
    if count:
        print(f"  {name}: {count} holes ({report.column_fractions[name]:.1%})")
print(f"joint patterns seen: {len(report.patterns)}")

repaired = impute(messy, "median_mode")
assert all(c.n_missing == 0 for c in repaired.columns)
print("imputed with column medians; no missing cells remain")

train, test = split(repaired, SplitSpec(train_fraction=0.7, seed=1))
print(f"split: {train.n_rows} train rows, {test.n_rows} test rows")
write_csv(train, OUT / "train.csv")
write_csv(test, OUT / "test.csv")
print(f"artifacts in {OUT}")
