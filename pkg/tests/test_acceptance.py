"""The release gate: one test per promised behavior, at its stated tolerance.

Oracles here are built from scratch (brute-force enumerations, closed-form
values, hand-rolled masks) so they cannot share a bug with the library code
they check. The car-insurance reproduction needs the original CSV, which is
not redistributable; point CAR_INSURANCE_CSV at a local copy to enable it,
otherwise that single test is skipped and the property suite governs.
"""

import itertools
import json
import math
import os
import textwrap
import time
from pathlib import Path

import numpy as np
import pytest

from boxlens import cli
from boxlens.anchors import anchor_explain, anchor_metrics
from boxlens.data import Table, impute, load_csv
from boxlens.fairness import (
    confusion,
    group_fairness,
    mcc,
    roc_auc,
)
from boxlens.importance import permutation_importance
from boxlens.lime import lime_explain
from boxlens.models import CallablePredictor, GbmParams, train_gbm
from boxlens.profiles import ale_first_order, ale_second_order, ice, pdp
from boxlens.shapley import shapley_exact, shapley_mc
from boxlens.synth import SyntheticSpec, generate
from boxlens.tuning import GridSpec, results_to_csv, search

from conftest import make_table


# ---------------------------------------------------------------------------
# helpers


def random_model_and_table(seed: int, n_rows: int = 60):
    """A small fitted 4-feature GBM plus its training table."""
    rng = np.random.default_rng(seed)
    cols = {f"x{j}": rng.uniform(-1.0, 1.0, n_rows) for j in range(1, 5)}
    w = rng.normal(size=4)
    y = (
        w[0] * cols["x1"]
        + w[1] * cols["x2"] ** 2
        + w[2] * cols["x3"] * cols["x4"]
        + w[3] * (cols["x4"] > 0)
    )
    table = make_table(**cols, y=y)
    params = GbmParams(
        n_trees=int(rng.integers(5, 15)),
        learning_rate=0.3,
        max_depth=int(rng.integers(2, 4)),
        seed=seed,
    )
    return train_gbm(table, "y", params), table


def splice_rows(background: Table, instance: dict, forced) -> Table:
    """Background rows with the instance's values forced on ``forced``,
    rebuilt column by column so it shares nothing with the library's
    splicer. Numeric-only tables (all the oracle cases here)."""
    cols = {}
    for c in background.columns:
        vals = c.values.astype(np.float64).copy()
        if c.name in forced:
            vals[:] = float(instance[c.name])
        cols[c.name] = vals
    return make_table(**cols)


def oracle_shapley(model, background: Table, instance: dict, features) -> np.ndarray:
    """Average marginal contribution over every feature ordering."""
    d = len(features)
    values = {}
    for r in range(d + 1):
        for subset in itertools.combinations(range(d), r):
            forced = [features[j] for j in subset]
            values[frozenset(subset)] = float(
                np.mean(model.predict(splice_rows(background, instance, forced)))
            )
    phi = np.zeros(d)
    for order in itertools.permutations(range(d)):
        seen = set()
        prev = values[frozenset()]
        for j in order:
            seen.add(j)
            cur = values[frozenset(seen)]
            phi[j] += cur - prev
            prev = cur
    return phi / math.factorial(d)


def predicate_mask(pred, table: Table) -> np.ndarray:
    """Re-derive which rows satisfy one predicate, from its public fields."""
    col = table.column(pred.feature)
    if pred.relation == "==":
        if col.kind == "categorical":
            code = col.levels.index(pred.value)
            return (col.values == code) & ~col.missing_mask
        return (col.values == pred.value) & ~col.missing_mask
    x = col.values.astype(np.float64)
    if pred.relation == "<=":
        return (x <= pred.value) & ~col.missing_mask
    if pred.relation == ">":
        return (x > pred.value) & ~col.missing_mask
    lo, hi = pred.value
    return (x >= lo) & (x <= hi) & ~col.missing_mask


# ---------------------------------------------------------------------------
# Table 1 reproduction (needs the original dataset; waived otherwise)


@pytest.mark.skipif(
    not os.environ.get("CAR_INSURANCE_CSV"),
    reason="set CAR_INSURANCE_CSV to the local car-insurance claim CSV to enable",
)
def test_car_insurance_cv_rmse_bands():
    path = os.environ["CAR_INSURANCE_CSV"]
    target = os.environ.get("CAR_INSURANCE_TARGET", "OUTCOME")
    table = impute(load_csv(path), "median_mode")
    drop = [n for n in ("ID", "POSTAL_CODE") if n in table.names]
    for name in drop:
        table = table.drop(name)

    configs = {
        "expt1": dict(n_trees=2000, learning_rate=0.001, max_depth=1,
                      min_node_size=1, col_sample=1.0, row_subsample=1.0),
        "expt2": dict(n_trees=2000, learning_rate=0.01, max_depth=3,
                      min_node_size=3, col_sample=1.0, row_subsample=1.0),
        "expt3": dict(n_trees=2000, learning_rate=0.1, max_depth=5,
                      min_node_size=2, col_sample=0.85, row_subsample=0.75),
        "xgbm": dict(n_trees=1000, learning_rate=0.05, max_depth=5,
                     min_node_size=1, col_sample=0.9, row_subsample=0.8),
    }
    bands = {"expt1": 0.354, "expt2": 0.325, "expt3": 0.323, "xgbm": 0.312}
    got = {}
    for name, kw in configs.items():
        spec = GridSpec(
            values={"learning_rate": [kw["learning_rate"]]},
            k_folds=5,
            seed=0,
            base=GbmParams(**kw),
        )
        got[name] = search(table, target, spec)[0].cv_metric
    for name, center in bands.items():
        assert abs(got[name] - center) <= 0.03, (name, got[name])
    assert got["expt1"] > got["expt2"] > got["expt3"] > got["xgbm"]


# ---------------------------------------------------------------------------
# Grid determinism


def test_grid_search_byte_identical_across_worker_counts():
    table, _ = generate(SyntheticSpec("linear", n_rows=5000, seed=3, noise=0.3))
    spec = GridSpec(
        values={
            "learning_rate": [0.05, 0.1, 0.3],
            "max_depth": [1, 3],
            "min_node_size": [1, 3],
            "row_subsample": [0.8, 1.0],
        },
        k_folds=3,
        seed=5,
        base=GbmParams(n_trees=10),
    )
    assert spec.size == 24
    serial = results_to_csv(search(table, "y", spec, workers=1))
    pooled = results_to_csv(search(table, "y", spec, workers=8))
    assert serial == pooled
    assert serial.count("\n") == 25  # header + 24 trials


# ---------------------------------------------------------------------------
# Shapley: oracle equivalence, MC error bars, axioms


def test_shapley_exact_matches_permutation_oracle_on_20_models():
    for seed in range(20):
        model, table = random_model_and_table(seed)
        instance = table.row_dict(0)
        att = shapley_exact(model, table, instance, instance_index=0)
        want = oracle_shapley(model, table, instance, att.features)
        assert np.max(np.abs(np.array(att.values) - want)) <= 1e-9, seed


def test_shapley_mc_within_three_stderr_of_exact():
    for seed in range(20):
        model, table = random_model_and_table(seed)
        instance = table.row_dict(0)
        exact = np.array(shapley_exact(model, table, instance).values)
        att = shapley_mc(model, table, instance, n_samples=10_000, seed=seed)
        err = np.abs(np.array(att.values) - exact)
        bound = 3.0 * np.array(att.stderr) + 1e-12
        assert np.all(err <= bound), (seed, err, bound)


def test_shapley_efficiency_axiom():
    for seed in range(20):
        model, table = random_model_and_table(seed)
        att = shapley_exact(model, table, table.row_dict(0))
        assert att.efficiency_gap <= 1e-9, seed


def test_shapley_dummy_axiom_exact_zero():
    rng = np.random.default_rng(0)
    table = make_table(
        x1=rng.normal(size=50),
        x2=rng.normal(size=50),
        x3=rng.normal(size=50),
        x4=rng.normal(size=50),
        y=rng.normal(size=50),
    )
    model = train_gbm(
        table, "y", GbmParams(n_trees=8, max_depth=2, seed=1),
        features=["x1", "x2", "x3"],
    )
    att = shapley_exact(
        model, table, table.row_dict(0), features=("x1", "x2", "x3", "x4")
    )
    assert att.values[att.features.index("x4")] == 0.0


def test_shapley_symmetry_axiom():
    rng = np.random.default_rng(4)
    x = rng.uniform(0.0, 1.0, 80)
    table = make_table(x1=x, x2=x.copy())
    model = CallablePredictor(("x1", "x2"), lambda a: a["x1"] + a["x2"])
    att = shapley_exact(model, table, {"x1": 0.4, "x2": 0.4})
    v = dict(zip(att.features, att.values))
    assert abs(v["x1"] - v["x2"]) <= 1e-9


# ---------------------------------------------------------------------------
# ICE and PDP


def test_ice_mean_reproduces_pdp_on_10_pairs():
    for seed in range(10):
        model, table = random_model_and_table(seed + 100, n_rows=70)
        feature = f"x{seed % 4 + 1}"
        p = pdp(model, table, feature, grid_size=9)
        curves = ice(model, table, feature, grid_size=9)
        gap = np.abs(np.mean(np.asarray(curves.curves), axis=0) - p.curves[0])
        assert np.max(gap) <= 1e-12, (seed, feature)


# ---------------------------------------------------------------------------
# ALE


def test_ale_slope_recovers_coefficient_under_correlation():
    table, _ = generate(SyntheticSpec("correlated-pair", n_rows=4000, seed=9, noise=0.1))
    model = CallablePredictor(("x1", "x2"), lambda a: 3.0 * a["x1"] + 2.0 * a["x2"])
    prof = ale_first_order(model, table, "x1", n_bins=10)
    grid = np.asarray(prof.grid, dtype=float)
    curve = np.asarray(prof.curves[0], dtype=float)
    slope = (curve[-1] - curve[0]) / (grid[-1] - grid[0])
    assert abs(slope - 3.0) <= 0.01 * 3.0


def test_ale_matches_centered_pdp_when_features_independent():
    rng = np.random.default_rng(11)
    n = 10_000
    table = make_table(x1=rng.uniform(0, 1, n), x2=rng.uniform(0, 1, n))
    model = CallablePredictor(
        ("x1", "x2"), lambda a: a["x1"] ** 2 + 0.5 * a["x2"]
    )
    a = ale_first_order(model, table, "x1", n_bins=20)
    p = pdp(model, table, "x1", grid_size=30)
    grid = np.asarray(a.grid, dtype=float)
    ale_curve = np.asarray(a.curves[0], dtype=float)
    pdp_curve = np.interp(grid, np.asarray(p.grid, float), np.asarray(p.curves[0], float))
    counts = np.asarray(a.bin_counts, dtype=float)
    mids = 0.5 * (pdp_curve[:-1] + pdp_curve[1:])
    centered = pdp_curve - np.sum(counts * mids) / np.sum(counts)
    assert np.max(np.abs(centered - ale_curve)) <= 0.02


def test_ale_second_order_vanishes_for_additive_model():
    rng = np.random.default_rng(12)
    n = 3000
    table = make_table(x1=rng.uniform(0, 1, n), x2=rng.uniform(0, 1, n))
    model = CallablePredictor(("x1", "x2"), lambda a: a["x1"] + 2.0 * a["x2"])
    prof = ale_second_order(model, table, ("x1", "x2"), n_bins=8)
    assert np.max(np.abs(np.asarray(prof.curves, dtype=float))) <= 1e-9


# ---------------------------------------------------------------------------
# LIME


def test_lime_recovers_linear_weights_within_5_percent():
    rng = np.random.default_rng(13)
    n = 2000
    table = make_table(x1=rng.uniform(0, 1, n), x2=rng.uniform(0, 1, n))
    model = CallablePredictor(
        ("x1", "x2"), lambda a: 2.0 * a["x1"] - a["x2"] + 5.0
    )
    exp = lime_explain(
        model, table, {"x1": 0.5, "x2": 0.5}, k_features=2, n_samples=5000, seed=0
    )
    w = dict(zip(exp.features, exp.weights))
    assert abs(w["x1"] - 2.0) <= 0.05 * 2.0
    assert abs(w["x2"] + 1.0) <= 0.05 * 1.0


def test_lime_kernel_width_sweep_improves_local_fit():
    rng = np.random.default_rng(14)
    n = 4000
    table = make_table(x1=rng.uniform(0, 1, n), x2=rng.uniform(0, 1, n))

    def piecewise(a):
        return np.where(a["x1"] > 0.5, 4.0 * (a["x1"] - 0.5), 0.0)

    model = CallablePredictor(("x1", "x2"), piecewise)
    instance = {"x1": 0.8, "x2": 0.5}
    errors = []
    for width in (1.0, 0.5, 0.25):
        exp = lime_explain(
            model, table, instance, k_features=2, n_samples=6000,
            kernel_width=width, seed=3,
        )
        w = dict(zip(exp.features, exp.weights))
        errors.append(abs(w["x1"] - 4.0))
    assert errors[0] > errors[1] > errors[2]


# ---------------------------------------------------------------------------
# Anchors


def check_anchor_guarantee(model, table, instances, tau=0.95):
    for i in instances:
        rule = anchor_explain(
            model, table, table.row_dict(i),
            tau=tau, n_samples_per_eval=2000, seed=100 + i, instance_index=i,
        )
        assert rule.satisfied, f"instance {i}: no anchor reached tau"
        fresh_precision, _ = anchor_metrics(
            rule, model, table, n_samples=4000, seed=999 + i
        )
        assert fresh_precision >= tau - 0.02, (i, fresh_precision)
        # coverage can only shrink as predicates are added
        running = np.ones(table.n_rows, dtype=bool)
        prev = 1.0
        for pred in rule.predicates:
            running &= predicate_mask(pred, table)
            cov = running.mean()
            assert cov <= prev + 1e-12
            prev = cov


def test_anchor_precision_guarantee_on_stump():
    rng = np.random.default_rng(15)
    n = 2000
    table = make_table(x1=rng.uniform(0, 1, n), x2=rng.uniform(0, 1, n))
    model = CallablePredictor(
        ("x1", "x2"), lambda a: (a["x1"] > 0.5).astype(np.float64)
    )
    # instances well inside a quartile cell: the candidate interval then
    # sits cleanly on one side of the stump's split
    x1 = table.column("x1").values
    picks = [
        int(np.argmax(x1)),
        int(np.argmin(x1)),
        int(np.argmin(np.abs(x1 - 0.85))),
        int(np.argmin(np.abs(x1 - 0.10))),
    ]
    check_anchor_guarantee(model, table, picks)


def test_anchor_precision_guarantee_on_depth3_tree():
    rng = np.random.default_rng(16)
    n = 1500
    x1 = rng.uniform(0, 1, n)
    x2 = rng.uniform(0, 1, n)
    x3 = rng.uniform(0, 1, n)
    x4 = rng.uniform(0, 1, n)
    y = np.where(x1 > 0.5, (x2 > 0.3).astype(float), (x3 > 0.7).astype(float))
    table = make_table(x1=x1, x2=x2, x3=x3, x4=x4, y=y)
    model = train_gbm(
        table, "y",
        GbmParams(n_trees=1, learning_rate=1.0, max_depth=3, min_node_size=1),
    )
    # the rule regions must be learned exactly for the guarantee to be testable
    assert np.max(np.abs(model.predict(table) - y)) <= 1e-12
    picks = [
        int(np.argmax((x1 > 0.7) & (x2 > 0.6))),
        int(np.argmax((x1 < 0.3) & (x3 > 0.9))),
        int(np.argmax((x1 > 0.8) & (x2 < 0.1))),
        int(np.argmax((x1 < 0.2) & (x3 < 0.3))),
    ]
    check_anchor_guarantee(model, table, picks)


# ---------------------------------------------------------------------------
# Permutation importance


def test_permutation_importance_ignored_feature_is_exactly_zero():
    rng = np.random.default_rng(17)
    n = 500
    x1 = rng.uniform(0, 1, n)
    table = make_table(x1=x1, x2=rng.uniform(0, 1, n), y=x1)
    model = CallablePredictor(("x1", "x2"), lambda a: a["x1"])
    report = permutation_importance(model, table, "y", n_repeats=5, seed=0)
    assert report.importance[report.features.index("x2")] == 0.0


def test_permutation_importance_matches_analytic_value():
    rng = np.random.default_rng(18)
    n = 4000
    x1 = rng.uniform(0, 1, n)
    table = make_table(x1=x1, x2=rng.uniform(0, 1, n), y=x1)
    model = CallablePredictor(("x1", "x2"), lambda a: a["x1"])
    report = permutation_importance(model, table, "y", n_repeats=5, seed=1)
    got = report.importance[report.features.index("x1")]
    want = math.sqrt(2.0 / 12.0)  # rmse of x - x' for independent U(0,1)
    assert abs(got - want) <= 0.05 * want


# ---------------------------------------------------------------------------
# Fairness


def test_mcc_equals_pearson_on_100_random_settings():
    rng = np.random.default_rng(19)
    done = 0
    while done < 100:
        n = int(rng.integers(20, 200))
        truth = rng.integers(0, 2, n).astype(float)
        pred = rng.integers(0, 2, n).astype(float)
        if len(set(truth)) < 2 or len(set(pred)) < 2:
            continue
        cm = confusion(pred, truth, threshold=0.5)
        want = np.corrcoef(pred, truth)[0, 1]
        assert abs(mcc(cm) - want) <= 1e-9
        done += 1


def test_trapezoid_auc_equals_pairwise_oracle_on_20_sets():
    rng = np.random.default_rng(20)
    for _ in range(20):
        n = int(rng.integers(30, 150))
        scores = rng.integers(0, 6, n).astype(float)  # heavy ties on purpose
        truth = rng.integers(0, 2, n).astype(float)
        if truth.min() == truth.max():
            continue
        pos = scores[truth == 1.0]
        neg = scores[truth == 0.0]
        wins = (pos[:, None] > neg[None, :]).sum()
        ties = (pos[:, None] == neg[None, :]).sum()
        want = (wins + 0.5 * ties) / (len(pos) * len(neg))
        _, auc = roc_auc(scores, truth)
        assert abs(auc - want) <= 1e-9


def test_group_confusions_sum_to_global():
    rng = np.random.default_rng(21)
    n = 500
    scores = rng.uniform(0, 1, n)
    truth = rng.integers(0, 2, n).astype(float)
    groups = rng.choice(["a", "b", "c"], n)
    total = None
    for g in ("a", "b", "c"):
        cm = confusion(scores[groups == g], truth[groups == g], threshold=0.5)
        total = cm if total is None else total + cm
    assert total == confusion(scores, truth, threshold=0.5)


def test_noise_group_auc_is_chance():
    table, truth = generate(SyntheticSpec("noise-group", n_rows=6000, seed=22, noise=0.1))
    model = CallablePredictor(("x1",), lambda a: a["x1"])
    report = group_fairness(model, table, "y", "g", threshold=0.0)
    by_level = dict(zip(report.levels, report.groups))
    noise_level = truth["noise_group"]
    assert abs(by_level[noise_level].auc - 0.5) <= 0.03
    for level in truth["informative_groups"]:
        assert by_level[level].auc > 0.8


# ---------------------------------------------------------------------------
# Pipeline end to end


def test_pipeline_end_to_end_on_step_dataset(tmp_path):
    t0 = time.perf_counter()
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    rc = cli.main([
        "synth", "--generator", "step", "--n-rows", "1500", "--seed", "21",
        "--noise", "0.02", "--out", str(data_dir),
    ])
    assert rc == 0

    # pick a test-split row sitting clearly inside the positive region, so
    # the anchor question has an unambiguous answer
    from boxlens.data import SplitSpec, split

    table = load_csv(data_dir / "synthetic.csv")
    _, test = split(table, SplitSpec(train_fraction=0.7, seed=7))
    x1 = test.column("x1").values
    instance = int(np.argmax(x1))

    cfg = tmp_path / "pipeline.toml"
    cfg.write_text(textwrap.dedent(f"""
        [data]
        path = "{data_dir / 'synthetic.csv'}"
        target = "y"

        [split]
        train_fraction = 0.7
        seed = 7

        [model]
        n_trees = 200
        learning_rate = 0.2
        max_depth = 3

        [explain]
        methods = ["vi", "pdp", "ale", "lime", "shapley", "anchors"]
        instances = [{instance}]
        n_samples = 2000
        tau = 0.95

        [fairness]
        group_by = "g"

        [run]
        seed = 7
        """))
    out = tmp_path / "run"
    assert cli.main(["pipeline", "--config", str(cfg), "--out", str(out)]) == 0

    # VI must rank the true step feature first
    rows = (out / "importance.csv").read_text().splitlines()
    assert rows[1].split(",")[1] == "x1"

    # the anchor must pin x1 down with certified precision
    case = (out / "anchors.csv").read_text().splitlines()[1]
    precision = float(case.split(",")[1])
    assert precision >= 0.95
    assert "x1" in case
    anchors = json.loads((out / "anchors.json").read_text())
    assert anchors[0]["satisfied"] is True
    assert any(p["feature"] == "x1" for p in anchors[0]["predicates"])

    # identical re-run: every artifact byte-identical, only timing may move
    def snapshot(root: Path) -> dict:
        return {
            p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "manifest.json"
        }

    before = snapshot(out)
    manifest_before = json.loads((out / "manifest.json").read_text())
    assert cli.main(["pipeline", "--config", str(cfg), "--out", str(out)]) == 0
    assert snapshot(out) == before
    manifest_after = json.loads((out / "manifest.json").read_text())
    manifest_before.pop("volatile")
    manifest_after.pop("volatile")
    assert manifest_before == manifest_after

    assert time.perf_counter() - t0 < 120.0
