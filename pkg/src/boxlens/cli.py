"""Shell entry point: every toolkit stage as a subcommand.

Configuration lives in a TOML or JSON file; individual flags override
config fields. Each command writes its artifacts into one run directory
together with a manifest.json listing inputs, outputs, the resolved
config and library versions. Timing and start time sit in the
manifest's "volatile" block so identical re-runs produce identical
bytes everywhere else.

Output directory resolution: --out if given, else $BOXLENS_OUT/<command>,
else boxlens-runs/<command> under the working directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import re
import sys
import time
from dataclasses import replace as dc_replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .anchors import anchor_explain, anchors_to_csv
from .data import (
    DEFAULT_SENTINELS,
    SplitSpec,
    impute,
    load_csv,
    missingness,
    split,
    write_csv,
)
from .errors import BoxlensError, ConfigError, DataError
from .fairness import group_fairness, write_fairness_csvs
from .importance import permutation_importance, write_importance_csv
from .lime import lime_explain
from .models import (
    GbmParams,
    load_model,
    residuals,
    rmse,
    save_model,
    train_gbm,
    train_glm,
)
from .perturb import feature_names_of
from .profiles import ale_first_order, ale_second_order, ice, pdp, write_profile_csv
from .shapley import EXACT_LIMIT, shapley_exact, shapley_mc
from .svgplot import bar_chart, heatmap, line_plot, write_svg
from .synth import GENERATORS, SyntheticSpec, write_synthetic
from .tuning import (
    DEFAULT_GRID_VALUES,
    GridSpec,
    best_trial,
    search,
    trial_seed,
    write_results_csv,
)

OUT_DIR_ENV = "BOXLENS_OUT"

EXPLAIN_METHODS = ("vi", "pdp", "ice", "ale", "ale2", "lime", "shapley", "anchors")

DATA_PARTS = ("train", "test", "all")


# ---------------------------------------------------------------------------
# Configuration


def default_config() -> dict:
    """The full config tree with its shipped defaults.

    Empty strings, empty lists and 0.0/0 stand in for "unset" so the whole
    tree stays expressible in TOML (which has no null).
    """
    return {
        "data": {
            "path": "",
            "target": "",
            "impute": "median_mode",
            "schema": {},
            "sentinels": [],
        },
        "split": {"train_fraction": 0.7, "stratify_on": ""},
        "model": {
            "kind": "gbm",
            "path": "",
            "n_trees": 100,
            "learning_rate": 0.1,
            "max_depth": 3,
            "min_node_size": 1,
            "col_sample": 1.0,
            "row_subsample": 1.0,
            "loss": "squared",
            "glm": {"mode": "linear", "l2": 0.0, "max_iter": 5000, "tol": 1e-10},
        },
        "tune": {"enabled": False, "k_folds": 5, "grid": {}},
        "explain": {
            "methods": ["vi", "pdp", "ale", "lime", "shapley", "anchors"],
            "data": "test",
            "feature": "",
            "features": [],
            "instances": [0],
            "grid_size": 20,
            "n_bins": 10,
            "ice_sample": 0,
            "centered": False,
            "n_repeats": 5,
            "k_features": 3,
            "n_samples": 1000,
            "kernel_width": 0.0,
            "shapley_mode": "auto",
            "tau": 0.95,
            "label_threshold": 0.5,
        },
        "fairness": {"group_by": "", "threshold": 0.5},
        "run": {"seed": 0, "workers": 1},
    }


# free-form sub-tables: arbitrary keys allowed
_OPEN_TABLES = {"data.schema", "tune.grid"}

# sections that accept an optional per-stage "seed" shadowing run.seed
_SEEDABLE = {"data", "split", "model", "tune", "explain", "fairness"}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key == "seed" and path in _SEEDABLE:
            out[key] = int(value)
            continue
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a table/object")
            if where in _OPEN_TABLES:
                out[key] = {**base[key], **value}
            else:
                out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Read TOML or JSON (by extension) and merge it over the defaults."""
    cfg = default_config()
    if path is None:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    suffix = p.suffix.lower()
    try:
        if suffix == ".toml":
            with open(p, "rb") as fh:
                doc = tomllib.load(fh)
        elif suffix == ".json":
            with open(p, encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            raise ConfigError(f"config must be a .toml or .json file, got {p.name!r}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a table/object")
    return _merge(cfg, doc)


def _seed(cfg: dict, section: str) -> int:
    """Per-stage seed when set, otherwise the global run seed."""
    return int(cfg[section].get("seed", cfg["run"]["seed"]))


def _config_from_args(args) -> dict:
    """Config file plus any flag overrides this subcommand defines."""
    cfg = load_config(getattr(args, "config", None))
    for section, key, attr in (
        ("data", "path", "data"),
        ("data", "target", "target"),
        ("data", "impute", "strategy"),
        ("split", "train_fraction", "train_fraction"),
        ("split", "stratify_on", "stratify_on"),
        ("model", "kind", "kind"),
        ("model", "n_trees", "n_trees"),
        ("model", "learning_rate", "learning_rate"),
        ("model", "max_depth", "max_depth"),
        ("model", "loss", "loss"),
        ("model", "path", "model"),
        ("tune", "k_folds", "k_folds"),
        ("explain", "data", "part"),
        ("explain", "feature", "feature"),
        ("explain", "features", "features"),
        ("explain", "instances", "instance"),
        ("explain", "grid_size", "grid_size"),
        ("explain", "n_bins", "n_bins"),
        ("explain", "ice_sample", "sample"),
        ("explain", "centered", "centered"),
        ("explain", "n_repeats", "n_repeats"),
        ("explain", "k_features", "k_features"),
        ("explain", "n_samples", "n_samples"),
        ("explain", "kernel_width", "kernel_width"),
        ("explain", "shapley_mode", "shapley_mode"),
        ("explain", "tau", "tau"),
        ("explain", "label_threshold", "label_threshold"),
        ("fairness", "group_by", "group_by"),
        ("fairness", "threshold", "threshold"),
        ("run", "seed", "seed"),
        ("run", "workers", "workers"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            cfg[section][key] = list(value) if isinstance(value, tuple) else value
    return cfg


# ---------------------------------------------------------------------------
# Run directory and manifest


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_out(args, command: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get(OUT_DIR_ENV)
    base = Path(env) if env else Path("boxlens-runs")
    return base / command


class RunContext:
    """One run directory plus the bookkeeping for its manifest."""

    def __init__(self, command: str, run_dir, config: dict):
        self.command = command
        self.dir = Path(run_dir)
        self.config = config
        self.inputs: dict[str, str] = {}
        self.started = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.t0 = time.perf_counter()
        self.dir.mkdir(parents=True, exist_ok=True)

    def add_input(self, path) -> None:
        p = Path(path)
        self.inputs[str(p)] = _sha256_file(p)

    def path(self, name: str) -> Path:
        return self.dir / name

    def write_json(self, name: str, doc) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_text(self, name: str, text: str) -> None:
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def finish(self) -> Path:
        """Hash every artifact and drop the manifest next to them.

        Anything time-dependent goes under "volatile"; the rest of the
        document is a pure function of config and inputs.
        """
        outputs = {}
        for p in sorted(self.dir.rglob("*")):
            if p.is_file() and p.name != "manifest.json":
                outputs[p.relative_to(self.dir).as_posix()] = _sha256_file(p)
        manifest = {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": outputs,
            "versions": {
                "boxlens": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "volatile": {
                "started_at": self.started,
                "wall_time_s": round(time.perf_counter() - self.t0, 6),
            },
        }
        path = self.dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


# ---------------------------------------------------------------------------
# Shared stage helpers


def _load_table(path, schema=None, sentinels=None):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"data file not found: {p}")
    extra = tuple(str(s) for s in sentinels) if sentinels else ()
    return load_csv(
        p,
        schema=dict(schema) if schema else None,
        sentinels=DEFAULT_SENTINELS + extra,
    )


def _require_data_config(cfg: dict) -> None:
    if not cfg["data"]["path"]:
        raise ConfigError("data.path is required (set it in the config or pass --data)")
    if not cfg["data"]["target"]:
        raise ConfigError(
            "data.target is required (set it in the config or pass --target)"
        )


def _prepare_data(cfg: dict, ctx: RunContext):
    """Load, optionally impute, and split per the config. Returns
    (full table, train, test, target name)."""
    _require_data_config(cfg)
    dcfg = cfg["data"]
    table = _load_table(dcfg["path"], dcfg["schema"], dcfg["sentinels"])
    ctx.add_input(dcfg["path"])
    target = dcfg["target"]
    table.column(target)  # raises SchemaError with the name when absent
    strategy = dcfg["impute"]
    if strategy != "none" and any(c.n_missing for c in table.columns):
        table = impute(table, strategy, seed=_seed(cfg, "data"))
    spec = SplitSpec(
        train_fraction=float(cfg["split"]["train_fraction"]),
        seed=_seed(cfg, "split"),
        stratify_on=cfg["split"]["stratify_on"] or None,
    )
    train, test = split(table, spec)
    return table, train, test, target


def _pick_part(cfg: dict, table, train, test):
    part = cfg["explain"]["data"]
    if part not in DATA_PARTS:
        raise ConfigError(f"explain.data must be one of {DATA_PARTS}, got {part!r}")
    return {"train": train, "test": test, "all": table}[part]


def _gbm_params(cfg: dict) -> GbmParams:
    m = cfg["model"]
    return GbmParams(
        n_trees=int(m["n_trees"]),
        learning_rate=float(m["learning_rate"]),
        max_depth=int(m["max_depth"]),
        min_node_size=int(m["min_node_size"]),
        col_sample=float(m["col_sample"]),
        row_subsample=float(m["row_subsample"]),
        loss=m["loss"],
        seed=_seed(cfg, "model"),
    )


def _fit_model(cfg: dict, train, target: str):
    kind = cfg["model"]["kind"]
    if kind == "gbm":
        return train_gbm(train, target, _gbm_params(cfg))
    if kind == "glm":
        g = cfg["model"]["glm"]
        return train_glm(
            train,
            target,
            mode=g["mode"],
            l2=float(g["l2"]),
            max_iter=int(g["max_iter"]),
            tol=float(g["tol"]),
        )
    raise ConfigError(f"unknown model.kind {kind!r} (expected 'gbm' or 'glm')")


def _load_model_artifact(cfg: dict, ctx: RunContext):
    """Find the saved model this stage depends on, or say how to make one."""
    path = cfg["model"]["path"] or None
    if path is None:
        candidate = ctx.dir / "model.json"
        if candidate.is_file():
            path = candidate
    if path is None:
        raise DataError(
            "no trained model found: pass --model <run-dir>/model.json (or set "
            "model.path); create one first with `boxlens train` or `boxlens tune`"
        )
    p = Path(path)
    if not p.is_file():
        raise DataError(
            f"model artifact {p} does not exist; run `boxlens train` or "
            "`boxlens tune` first and point --model at its model.json"
        )
    ctx.add_input(p)
    return load_model(p)


def _write_model_artifacts(ctx: RunContext, cfg, model, train, test, target) -> list:
    """model.json + held-out metrics + residuals; shared by train and tune."""
    save_model(model, ctx.path("model.json"))
    train_truth = train.column(target).values.astype(np.float64)
    test_truth = test.column(target).values.astype(np.float64)
    test_pred = model.predict(test)
    metrics = {
        "kind": cfg["model"]["kind"],
        "target": target,
        "n_train": train.n_rows,
        "n_test": test.n_rows,
        "train_rmse": rmse(model.predict(train), train_truth),
        "test_rmse": rmse(test_pred, test_truth),
    }
    ctx.write_json("metrics.json", metrics)
    res = residuals(model, test, target)
    lines = ["index,truth,prediction,residual"]
    for i, (t, p, r) in enumerate(zip(test_truth, test_pred, res)):
        lines.append(f"{i},{t!r},{p!r},{r!r}")
    ctx.write_text("residuals.csv", "\n".join(lines) + "\n")
    return ["model.json", "metrics.json", "residuals.csv"]


def _tune_stage(cfg: dict, ctx: RunContext, train, target: str, workers: int) -> tuple:
    """Grid search, artifacts, and the refit final model.

    The final model is trained with the winning grid point but the
    configured model seed (not the trial's CV seed), so a one-point grid
    reproduces `boxlens train` byte for byte.
    """
    grid = cfg["tune"]["grid"] or {k: list(v) for k, v in DEFAULT_GRID_VALUES.items()}
    spec = GridSpec(
        values=grid,
        k_folds=int(cfg["tune"]["k_folds"]),
        seed=_seed(cfg, "tune"),
        base=_gbm_params(cfg),
    )
    results = search(train, target, spec, workers=workers)
    write_results_csv(results, ctx.path("trials.csv"))
    best = best_trial(results)
    ctx.write_json(
        "best_trial.json",
        {
            "trial": best.trial_index,
            "params": best.params.to_dict(),
            "cv_metric": best.cv_metric,
            "best_iteration": best.best_iteration,
            "per_fold_metrics": list(best.per_fold_metrics),
        },
    )
    final = train_gbm(train, target, dc_replace(best.params, seed=_seed(cfg, "model")))
    return results, best, final


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _instances(cfg: dict, data) -> list[int]:
    idxs = cfg["explain"]["instances"]
    if isinstance(idxs, int):
        idxs = [idxs]
    out = [int(i) for i in idxs]
    if not out:
        raise ConfigError("explain.instances must name at least one row")
    for i in out:
        if not 0 <= i < data.n_rows:
            raise ConfigError(
                f"instance {i} is out of range for the selected rows (0..{data.n_rows - 1})"
            )
    return out


def _profile_svg(prof, title: str) -> str:
    """Pick the plot shape that fits the profile's grid."""
    if prof.kind == "ale2":
        return heatmap(
            np.asarray(prof.curves, dtype=float),
            np.asarray(prof.grid, dtype=float),
            np.asarray(prof.grid2, dtype=float),
            title=title,
        )
    if any(isinstance(g, str) for g in prof.grid):
        return bar_chart(
            [str(g) for g in prof.grid],
            np.asarray(prof.curves[0], dtype=float),
            title=title,
        )
    xs = np.asarray(prof.grid, dtype=float)
    curves = np.asarray(prof.curves, dtype=float)
    # a readable cap; the CSV always carries every curve
    keep = min(len(curves), 30)
    series = [
        (str(prof.curve_ids[i]), xs, curves[i]) for i in range(keep)
    ]
    return line_plot(series, title=title, rug=tuple(prof.rug))


def _explain_feature(cfg: dict, vi_report) -> str:
    f = cfg["explain"]["feature"]
    if f:
        return f
    if vi_report is not None:
        return vi_report.top(1)[0]
    raise ConfigError(
        "explain.feature is required for this method (pass --feature, or run "
        "the vi method first so the top-ranked feature can be used)"
    )


def _explain_one(method, cfg, model, data, target, ctx, written, vi_report=None):
    """Run one explanation method and write its artifacts.

    Returns the importance report for "vi" (the pipeline feeds it back in
    as the default feature chooser), else None.
    """
    ecfg = cfg["explain"]
    seed = _seed(cfg, "explain")

    if method == "vi":
        rep = permutation_importance(
            model, data, target, n_repeats=int(ecfg["n_repeats"]), seed=seed
        )
        write_importance_csv(rep, ctx.path("importance.csv"))
        labels = rep.top(len(rep.features))
        by_name = dict(zip(rep.features, rep.importance))
        svg = bar_chart(
            labels, [by_name[f] for f in labels], title="permutation importance"
        )
        write_svg(svg, ctx.path("importance.svg"))
        written += ["importance.csv", "importance.svg"]
        return rep

    if method in ("pdp", "ice", "ale"):
        feature = _explain_feature(cfg, vi_report)
        if method == "pdp":
            prof = pdp(model, data, feature, grid_size=int(ecfg["grid_size"]))
        elif method == "ice":
            sample = int(ecfg["ice_sample"]) or None
            prof = ice(
                model,
                data,
                feature,
                grid_size=int(ecfg["grid_size"]),
                sample=sample,
                centered=bool(ecfg["centered"]),
                seed=seed,
            )
        else:
            prof = ale_first_order(model, data, feature, n_bins=int(ecfg["n_bins"]))
        stem = f"{method}_{_safe_name(feature)}"
        write_profile_csv(prof, ctx.path(stem + ".csv"))
        write_svg(_profile_svg(prof, f"{method}: {feature}"), ctx.path(stem + ".svg"))
        written += [stem + ".csv", stem + ".svg"]
        return None

    if method == "ale2":
        pair = list(cfg["explain"]["features"])
        if len(pair) != 2:
            raise ConfigError(
                "ale2 needs exactly two feature names (pass --features F1 F2 "
                "or set explain.features)"
            )
        prof = ale_second_order(
            model, data, (pair[0], pair[1]), n_bins=int(ecfg["n_bins"])
        )
        stem = f"ale2_{_safe_name(pair[0])}_{_safe_name(pair[1])}"
        write_profile_csv(prof, ctx.path(stem + ".csv"))
        title = f"ale2: {pair[0]} x {pair[1]}"
        write_svg(_profile_svg(prof, title), ctx.path(stem + ".svg"))
        written += [stem + ".csv", stem + ".svg"]
        return None

    if method == "lime":
        kw = float(ecfg["kernel_width"]) or None
        for i in _instances(cfg, data):
            exp = lime_explain(
                model,
                data,
                data.row_dict(i),
                k_features=int(ecfg["k_features"]),
                n_samples=int(ecfg["n_samples"]),
                kernel_width=kw,
                seed=trial_seed(seed, i),
                instance_index=i,
            )
            ctx.write_text(f"lime_{i}.json", exp.to_json() + "\n")
            ctx.write_text(f"lime_{i}.csv", exp.to_csv())
            svg = bar_chart(
                list(exp.features), list(exp.weights), title=f"lime: row {i}"
            )
            write_svg(svg, ctx.path(f"lime_{i}.svg"))
            written += [f"lime_{i}.json", f"lime_{i}.csv", f"lime_{i}.svg"]
        return None

    if method == "shapley":
        mode = ecfg["shapley_mode"]
        if mode not in ("auto", "exact", "mc"):
            raise ConfigError(
                f"explain.shapley_mode must be auto, exact or mc, got {mode!r}"
            )
        d = len(feature_names_of(model, data))
        exact = mode == "exact" or (mode == "auto" and d <= EXACT_LIMIT)
        for i in _instances(cfg, data):
            if exact:
                att = shapley_exact(model, data, data.row_dict(i), instance_index=i)
            else:
                att = shapley_mc(
                    model,
                    data,
                    data.row_dict(i),
                    n_samples=int(ecfg["n_samples"]),
                    seed=trial_seed(seed, i),
                    instance_index=i,
                )
            ctx.write_text(f"shapley_{i}.json", att.to_json() + "\n")
            ctx.write_text(f"shapley_{i}.csv", att.to_csv())
            svg = bar_chart(
                list(att.features), list(att.values), title=f"shapley: row {i}"
            )
            write_svg(svg, ctx.path(f"shapley_{i}.svg"))
            written += [f"shapley_{i}.json", f"shapley_{i}.csv", f"shapley_{i}.svg"]
        return None

    if method == "anchors":
        cases = _instances(cfg, data)
        rules = []
        for i in cases:
            rule = anchor_explain(
                model,
                data,
                data.row_dict(i),
                tau=float(ecfg["tau"]),
                n_samples_per_eval=int(ecfg["n_samples"]),
                seed=trial_seed(seed, i),
                threshold=float(ecfg["label_threshold"]),
                instance_index=i,
            )
            if not rule.satisfied:
                print(
                    f"anchors: row {i}: precision bound never reached tau="
                    f"{ecfg['tau']}; reporting the best rule found",
                    file=sys.stderr,
                )
            rules.append(rule)
        ctx.write_text("anchors.csv", anchors_to_csv(rules, cases=cases))
        ctx.write_json("anchors.json", [r.to_dict() for r in rules])
        written += ["anchors.csv", "anchors.json"]
        return None

    raise ConfigError(f"unknown explain method {method!r} (expected one of {EXPLAIN_METHODS})")


def _run_fairness(cfg, model, data, target, ctx, written) -> None:
    fcfg = cfg["fairness"]
    if not fcfg["group_by"]:
        raise ConfigError("fairness.group_by is required (pass --group-by)")
    report = group_fairness(
        model, data, target, fcfg["group_by"], threshold=float(fcfg["threshold"])
    )
    ctx.write_text("fairness.json", report.to_json() + "\n")
    write_fairness_csvs(
        report, ctx.path("fairness_metrics.csv"), ctx.path("fairness_roc.csv")
    )
    written += ["fairness.json", "fairness_metrics.csv", "fairness_roc.csv"]
    series = []
    for level, g in zip(report.levels, report.groups):
        if g.roc:
            pts = np.asarray(g.roc, dtype=float)
            series.append((level, pts[:, 0], pts[:, 1]))
    if series:
        series.append(("chance", np.array([0.0, 1.0]), np.array([0.0, 1.0])))
        svg = line_plot(series, title=f"ROC by {fcfg['group_by']}")
        write_svg(svg, ctx.path("fairness_roc.svg"))
        written.append("fairness_roc.svg")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_inspect(args) -> int:
    cfg = _config_from_args(args)
    if getattr(args, "data_path", None):
        cfg["data"]["path"] = args.data_path
    if not cfg["data"]["path"]:
        raise ConfigError("give a CSV path (positional) or set data.path in --config")
    ctx = RunContext("inspect", _resolve_out(args, "inspect"), cfg)
    table = _load_table(
        cfg["data"]["path"], cfg["data"]["schema"], cfg["data"]["sentinels"]
    )
    ctx.add_input(cfg["data"]["path"])
    report = missingness(table)
    ctx.write_text("missingness.json", report.to_json() + "\n")
    report.write_pattern_csv(ctx.path("missing_patterns.csv"), table.names)
    ctx.finish()
    incomplete = {n: c for n, c in report.column_counts.items() if c}
    print(
        f"inspect: {table.n_rows} rows x {report.n_cols} columns, "
        f"{len(incomplete)} columns with missing cells "
        f"(overall {report.overall_fraction:.1%}) -> {ctx.dir}"
    )
    for name, count in sorted(incomplete.items(), key=lambda kv: (-kv[1], kv[0])):
        print(f"  {name}: {count} missing")
    return 0


def cmd_impute(args) -> int:
    cfg = _config_from_args(args)
    if getattr(args, "data_path", None):
        cfg["data"]["path"] = args.data_path
    if not cfg["data"]["path"]:
        raise ConfigError("give a CSV path (positional) or set data.path in --config")
    strategy = cfg["data"]["impute"]
    if strategy == "none":
        raise ConfigError("data.impute is 'none'; pick median_mode or predictive")
    ctx = RunContext("impute", _resolve_out(args, "impute"), cfg)
    table = _load_table(
        cfg["data"]["path"], cfg["data"]["schema"], cfg["data"]["sentinels"]
    )
    ctx.add_input(cfg["data"]["path"])
    filled = sum(c.n_missing for c in table.columns)
    imputed = impute(table, strategy, seed=_seed(cfg, "data"))
    write_csv(imputed, ctx.path("imputed.csv"))
    ctx.finish()
    print(f"impute: filled {filled} cells with {strategy} -> {ctx.path('imputed.csv')}")
    return 0


def cmd_split(args) -> int:
    cfg = _config_from_args(args)
    if getattr(args, "data_path", None):
        cfg["data"]["path"] = args.data_path
    if not cfg["data"]["path"]:
        raise ConfigError("give a CSV path (positional) or set data.path in --config")
    ctx = RunContext("split", _resolve_out(args, "split"), cfg)
    table = _load_table(
        cfg["data"]["path"], cfg["data"]["schema"], cfg["data"]["sentinels"]
    )
    ctx.add_input(cfg["data"]["path"])
    spec = SplitSpec(
        train_fraction=float(cfg["split"]["train_fraction"]),
        seed=_seed(cfg, "split"),
        stratify_on=cfg["split"]["stratify_on"] or None,
    )
    train, test = split(table, spec)
    write_csv(train, ctx.path("train.csv"))
    write_csv(test, ctx.path("test.csv"))
    ctx.finish()
    print(f"split: {train.n_rows} train / {test.n_rows} test rows -> {ctx.dir}")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        generator=args.generator,
        n_rows=args.n_rows,
        seed=args.seed if args.seed is not None else 0,
        noise=args.noise,
    )
    cfg = {
        "generator": spec.generator,
        "n_rows": spec.n_rows,
        "seed": spec.seed,
        "noise": spec.noise,
    }
    ctx = RunContext("synth", _resolve_out(args, "synth"), cfg)
    write_synthetic(spec, ctx.path("synthetic.csv"), ctx.path("truth.json"))
    ctx.finish()
    print(
        f"synth: {spec.generator} with {spec.n_rows} rows -> "
        f"{ctx.path('synthetic.csv')} (+ truth.json)"
    )
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    ctx = RunContext("train", _resolve_out(args, "train"), cfg)
    table, train, test, target = _prepare_data(cfg, ctx)
    model = _fit_model(cfg, train, target)
    _write_model_artifacts(ctx, cfg, model, train, test, target)
    ctx.finish()
    with open(ctx.path("metrics.json"), encoding="utf-8") as fh:
        metrics = json.load(fh)
    print(
        f"train: {cfg['model']['kind']} on {train.n_rows} rows, test rmse "
        f"{metrics['test_rmse']:.4f} -> {ctx.path('model.json')}"
    )
    return 0


def cmd_tune(args) -> int:
    cfg = _config_from_args(args)
    if cfg["model"]["kind"] != "gbm":
        raise ConfigError("tuning searches GBM grids; set model.kind = 'gbm'")
    ctx = RunContext("tune", _resolve_out(args, "tune"), cfg)
    table, train, test, target = _prepare_data(cfg, ctx)
    workers = int(cfg["run"]["workers"])
    results, best, model = _tune_stage(cfg, ctx, train, target, workers)
    _write_model_artifacts(ctx, cfg, model, train, test, target)
    ctx.finish()
    n_failed = sum(1 for r in results if r.failed)
    note = f" ({n_failed} trials failed)" if n_failed else ""
    print(
        f"tune: {len(results)} trials with {workers} worker(s){note}; best trial "
        f"{best.trial_index} cv rmse {best.cv_metric:.4f} at iteration "
        f"{best.best_iteration} -> {ctx.path('model.json')}"
    )
    return 0


def cmd_explain(args) -> int:
    cfg = _config_from_args(args)
    ctx = RunContext(f"explain {args.method}", _resolve_out(args, f"explain-{args.method}"), cfg)
    table, train, test, target = _prepare_data(cfg, ctx)
    data = _pick_part(cfg, table, train, test)
    model = _load_model_artifact(cfg, ctx)
    written: list[str] = []
    _explain_one(args.method, cfg, model, data, target, ctx, written)
    ctx.finish()
    print(f"explain {args.method}: wrote {len(written)} artifacts -> {ctx.dir}")
    return 0


def cmd_fairness(args) -> int:
    cfg = _config_from_args(args)
    ctx = RunContext("fairness", _resolve_out(args, "fairness"), cfg)
    table, train, test, target = _prepare_data(cfg, ctx)
    data = _pick_part(cfg, table, train, test)
    model = _load_model_artifact(cfg, ctx)
    written: list[str] = []
    _run_fairness(cfg, model, data, target, ctx, written)
    ctx.finish()
    print(f"fairness: wrote {len(written)} artifacts -> {ctx.dir}")
    return 0


def cmd_pipeline(args) -> int:
    """Every stage end to end in a single run directory."""
    cfg = _config_from_args(args)
    ctx = RunContext("pipeline", _resolve_out(args, "pipeline"), cfg)
    _require_data_config(cfg)
    dcfg = cfg["data"]

    raw = _load_table(dcfg["path"], dcfg["schema"], dcfg["sentinels"])
    ctx.add_input(dcfg["path"])
    target = dcfg["target"]
    raw.column(target)
    report = missingness(raw)
    ctx.write_text("missingness.json", report.to_json() + "\n")
    report.write_pattern_csv(ctx.path("missing_patterns.csv"), raw.names)
    written = ["missingness.json", "missing_patterns.csv"]

    table = raw
    if dcfg["impute"] != "none" and any(c.n_missing for c in raw.columns):
        table = impute(raw, dcfg["impute"], seed=_seed(cfg, "data"))
        write_csv(table, ctx.path("imputed.csv"))
        written.append("imputed.csv")

    spec = SplitSpec(
        train_fraction=float(cfg["split"]["train_fraction"]),
        seed=_seed(cfg, "split"),
        stratify_on=cfg["split"]["stratify_on"] or None,
    )
    train, test = split(table, spec)
    write_csv(train, ctx.path("train.csv"))
    write_csv(test, ctx.path("test.csv"))
    written += ["train.csv", "test.csv"]

    if cfg["tune"]["enabled"]:
        if cfg["model"]["kind"] != "gbm":
            raise ConfigError("tuning searches GBM grids; set model.kind = 'gbm'")
        _, best, model = _tune_stage(cfg, ctx, train, target, int(cfg["run"]["workers"]))
        written += ["trials.csv", "best_trial.json"]
    else:
        model = _fit_model(cfg, train, target)
    written += _write_model_artifacts(ctx, cfg, model, train, test, target)

    data = _pick_part(cfg, table, train, test)
    methods = list(cfg["explain"]["methods"])
    for m in methods:
        if m not in EXPLAIN_METHODS:
            raise ConfigError(
                f"unknown explain method {m!r} in explain.methods "
                f"(expected a subset of {EXPLAIN_METHODS})"
            )
    vi_report = None
    if "vi" in methods:
        # run first so its top feature can stand in for explain.feature
        vi_report = _explain_one("vi", cfg, model, data, target, ctx, written)
    for m in methods:
        if m != "vi":
            _explain_one(m, cfg, model, data, target, ctx, written, vi_report=vi_report)

    if cfg["fairness"]["group_by"]:
        _run_fairness(cfg, model, data, target, ctx, written)

    ctx.finish()
    print(f"pipeline: {len(written)} artifacts -> {ctx.dir}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxlens",
        description="Explain tabular black-box models: ingest, fit, tune, probe.",
        epilog=(
            "Artifacts land in --out when given, else in "
            f"${OUT_DIR_ENV}/<command>, else in boxlens-runs/<command>."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    def new(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--out", help="run directory for artifacts")
        return p

    def config_flags(p, with_data=True):
        p.add_argument("--config", help="TOML or JSON config file")
        if with_data:
            p.add_argument("--data", help="input CSV (overrides data.path)")
            p.add_argument("--target", help="target column (overrides data.target)")
        p.add_argument("--seed", type=int, help="global seed (overrides run.seed)")

    p = new("inspect", "report missing-value counts and co-missingness patterns")
    p.add_argument("data_path", nargs="?", metavar="data.csv", help="CSV to inspect")
    p.add_argument("--config", help="TOML or JSON config file")
    p.set_defaults(func=cmd_inspect)

    p = new("impute", "fill missing cells and write the completed CSV")
    p.add_argument("data_path", nargs="?", metavar="data.csv", help="CSV to impute")
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument(
        "--strategy", choices=("median_mode", "predictive"), help="fill strategy"
    )
    p.add_argument("--seed", type=int, help="global seed (overrides run.seed)")
    p.set_defaults(func=cmd_impute)

    p = new("split", "partition a CSV into train.csv and test.csv")
    p.add_argument("data_path", nargs="?", metavar="data.csv", help="CSV to split")
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--train-fraction", type=float, help="train share in (0,1)")
    p.add_argument("--stratify-on", help="categorical column to stratify by")
    p.add_argument("--seed", type=int, help="global seed (overrides run.seed)")
    p.set_defaults(func=cmd_split)

    p = new("synth", "generate a synthetic dataset plus its ground-truth sidecar")
    p.add_argument("--generator", required=True, choices=GENERATORS)
    p.add_argument("--n-rows", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = new("train", "fit one model and write model.json, metrics and residuals")
    config_flags(p)
    p.add_argument("--kind", choices=("gbm", "glm"), help="model family")
    p.add_argument("--n-trees", type=int, help="GBM: boosting rounds")
    p.add_argument("--learning-rate", type=float, help="GBM: shrinkage")
    p.add_argument("--max-depth", type=int, help="GBM: tree depth")
    p.add_argument("--loss", choices=("squared", "logistic"), help="GBM loss")
    p.set_defaults(func=cmd_train)

    p = new("tune", "cross-validated grid search, then refit the best GBM")
    config_flags(p)
    p.add_argument("--k-folds", type=int, help="CV folds (overrides tune.k_folds)")
    p.add_argument("--workers", type=int, help="parallel trials (overrides run.workers)")
    p.set_defaults(func=cmd_tune)

    p = new("explain", "probe a saved model with one explanation method")
    p.add_argument("method", choices=EXPLAIN_METHODS)
    config_flags(p)
    p.add_argument("--model", help="path to a saved model.json")
    p.add_argument(
        "--part",
        choices=DATA_PARTS,
        help="which rows to explain on (overrides explain.data)",
    )
    p.add_argument("--feature", help="feature for pdp/ice/ale")
    p.add_argument(
        "--features", nargs=2, metavar=("F1", "F2"), help="feature pair for ale2"
    )
    p.add_argument(
        "--instance",
        type=int,
        action="append",
        help="row index to explain; repeatable (overrides explain.instances)",
    )
    p.add_argument("--grid-size", type=int, help="pdp/ice grid points")
    p.add_argument("--n-bins", type=int, help="ale/ale2 quantile bins")
    p.add_argument("--sample", type=int, help="ice: rows to draw (0 = cap default)")
    p.add_argument(
        "--centered",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="ice: anchor every curve at its first grid point",
    )
    p.add_argument("--n-repeats", type=int, help="vi: shuffles per feature")
    p.add_argument("--k-features", type=int, help="lime: surrogate sparsity")
    p.add_argument("--n-samples", type=int, help="lime/shapley-mc/anchors samples")
    p.add_argument("--kernel-width", type=float, help="lime: locality width")
    p.add_argument("--shapley-mode", choices=("auto", "exact", "mc"))
    p.add_argument("--tau", type=float, help="anchors: precision target")
    p.add_argument(
        "--label-threshold",
        dest="label_threshold",
        type=float,
        help="anchors: score cutoff defining the positive label",
    )
    p.set_defaults(func=cmd_explain)

    p = new("fairness", "per-group confusion, rates, MCC and ROC/AUC")
    config_flags(p)
    p.add_argument("--model", help="path to a saved model.json")
    p.add_argument(
        "--part",
        choices=DATA_PARTS,
        help="which rows to score (overrides explain.data)",
    )
    p.add_argument("--group-by", help="categorical column to split on")
    p.add_argument("--threshold", type=float, help="positive-label cutoff")
    p.set_defaults(func=cmd_fairness)

    p = new("pipeline", "inspect, impute, split, fit/tune, explain and audit in one run")
    config_flags(p)
    p.add_argument("--workers", type=int, help="parallel trials (overrides run.workers)")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BoxlensError as exc:
        print(f"boxlens {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
