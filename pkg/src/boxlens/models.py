"""Model zoo behind one scoring contract: rows in, real-valued predictions out.

Classification-mode models emit the probability of the positive class, so
every explainer downstream can treat all models identically. Trained models
are immutable and safe to share across threads or processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import trees
from .data import CATEGORICAL, NUMERIC, Column, Table
from .errors import ComputationError, ConfigError, DataError, FitError, SchemaError


class Predictor(Protocol):
    """Scoring contract every explainer consumes."""

    def predict(self, rows: Table) -> np.ndarray: ...


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    levels: tuple[str, ...] = ()


def _schema_of(table: Table, features: Sequence[str]) -> tuple[FeatureSpec, ...]:
    out = []
    for name in features:
        c = table.column(name)
        out.append(FeatureSpec(name, c.kind, c.levels))
    return tuple(out)


def _check_no_missing(table: Table, names: Sequence[str], context: str) -> None:
    for name in names:
        if table.column(name).n_missing:
            raise DataError(
                f"column {name!r} contains missing values; impute before {context}"
            )


def _encode(table: Table, schema: Sequence[FeatureSpec]) -> np.ndarray:
    """Matrix in the training encoding; categorical cells become training
    codes (unseen levels -> -2, routed to the 'rest' branch by trees)."""
    cols = []
    for spec in schema:
        if not table.has_column(spec.name):
            raise SchemaError(f"missing column {spec.name!r}")
        c = table.column(spec.name)
        if c.kind != spec.kind:
            raise SchemaError(
                f"column {spec.name!r} is {c.kind}, expected {spec.kind}"
            )
        if c.kind == NUMERIC:
            cols.append(c.values.astype(np.float64))
        else:
            lut = np.array(
                [spec.levels.index(lvl) if lvl in spec.levels else -2 for lvl in c.levels],
                dtype=np.int64,
            )
            codes = c.values.astype(np.int64)
            mapped = np.where(codes >= 0, lut[np.clip(codes, 0, None)], -1)
            cols.append(mapped.astype(np.float64))
    return np.column_stack(cols) if cols else np.empty((table.n_rows, 0))


# ---------------------------------------------------------------------------
# One-hot helpers (shared by the GLM design matrix and tests)


def one_hot(column: Column) -> tuple[np.ndarray, tuple[str, ...]]:
    """Full indicator encoding of a categorical column (no missing cells)."""
    if column.kind != CATEGORICAL:
        raise SchemaError(f"column {column.name!r} is not categorical")
    if column.n_missing:
        raise DataError(f"column {column.name!r} has missing cells")
    codes = column.values.astype(np.int64)
    mat = np.zeros((len(codes), len(column.levels)))
    mat[np.arange(len(codes)), codes] = 1.0
    return mat, column.levels


def decode_one_hot(matrix: np.ndarray, levels: Sequence[str], name: str) -> Column:
    codes = matrix.argmax(axis=1)
    cells = [levels[int(c)] for c in codes]
    return Column.categorical(name, cells, levels=levels)


# ---------------------------------------------------------------------------
# Generalized linear model


@dataclass(frozen=True)
class GlmModel:
    """Linear / logistic model; coefficients live in raw feature space.

    ``terms`` pairs each design column name (numeric features verbatim;
    categorical as "col=level" for every level past the reference) with
    its coefficient.
    """

    schema: tuple[FeatureSpec, ...]
    mode: str  # "linear" | "logistic"
    target: str
    intercept: float
    terms: tuple[tuple[str, float], ...]

    def predict(self, rows: Table) -> np.ndarray:
        _check_no_missing(rows, [s.name for s in self.schema], "prediction")
        design, _ = _glm_design(rows, self.schema)
        score = design @ np.array([w for _, w in self.terms]) + self.intercept
        if self.mode == "logistic":
            return _sigmoid(score)
        return score

    @property
    def coefficients(self) -> dict[str, float]:
        return dict(self.terms)


def _glm_design(table: Table, schema: Sequence[FeatureSpec]) -> tuple[np.ndarray, list[str]]:
    blocks, names = [], []
    for spec in schema:
        c = table.column(spec.name)
        if c.kind != spec.kind:
            raise SchemaError(f"column {spec.name!r} is {c.kind}, expected {spec.kind}")
        if spec.kind == NUMERIC:
            blocks.append(c.values.reshape(-1, 1).astype(np.float64))
            names.append(spec.name)
        else:
            # reference coding: first level drops out, keeps the design
            # full-rank alongside the intercept
            codes = c.values.astype(np.int64)
            for j, level in enumerate(spec.levels[1:], start=1):
                blocks.append((codes == j).astype(np.float64).reshape(-1, 1))
                names.append(f"{spec.name}={level}")
    X = np.hstack(blocks) if blocks else np.empty((table.n_rows, 0))
    return X, names


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_glm(
    train: Table,
    target: str,
    mode: str = "linear",
    l2: float = 0.0,
    max_iter: int = 5000,
    tol: float = 1e-10,
    features: Sequence[str] | None = None,
) -> GlmModel:
    """Fit by batch gradient descent with step halving on loss increase.

    Features are standardized internally for conditioning; returned
    coefficients are mapped back to raw scale. The l2 penalty applies to
    the standardized coefficients, never the intercept.
    """
    if mode not in ("linear", "logistic"):
        raise ConfigError(f"unknown GLM mode {mode!r}")
    if features is None:
        features = [n for n in train.names if n != target]
    if target in features:
        raise ConfigError(f"target {target!r} listed among features")
    if train.n_rows == 0:
        raise FitError("empty training table")
    _check_no_missing(train, list(features) + [target], "GLM training")

    tcol = train.column(target)
    if tcol.kind != NUMERIC:
        raise FitError(f"target {target!r} must be numeric")
    y = tcol.values.astype(np.float64)
    if mode == "logistic" and not np.isin(y, (0.0, 1.0)).all():
        raise FitError("logistic mode requires a binary 0/1 target")

    schema = _schema_of(train, features)
    X, names = _glm_design(train, schema)
    n, p = X.shape

    mu = X.mean(axis=0) if p else np.zeros(0)
    sd = X.std(axis=0) if p else np.zeros(0)
    sd = np.where(sd == 0.0, 1.0, sd)
    Xs = (X - mu) / sd
    design = np.hstack([np.ones((n, 1)), Xs])

    if l2 == 0.0 and np.linalg.matrix_rank(design) < p + 1:
        raise FitError("singular design with l2=0; add regularization or drop columns")

    def loss_grad(w):
        z = design @ w
        if mode == "linear":
            r = z - y
            loss = 0.5 * np.mean(r**2)
            grad = design.T @ r / n
        else:
            pz = _sigmoid(z)
            eps = 1e-12
            loss = -np.mean(y * np.log(pz + eps) + (1 - y) * np.log(1 - pz + eps))
            grad = design.T @ (pz - y) / n
        loss += 0.5 * l2 * np.sum(w[1:] ** 2)
        grad = grad + l2 * np.concatenate([[0.0], w[1:]])
        return loss, grad

    w = np.zeros(p + 1)
    loss, grad = loss_grad(w)
    step = 1.0
    for _ in range(max_iter):
        if np.max(np.abs(grad)) <= tol:
            break
        while step > 1e-18:
            cand = w - step * grad
            cand_loss, cand_grad = loss_grad(cand)
            if cand_loss <= loss:
                w, loss, grad = cand, cand_loss, cand_grad
                break
            step *= 0.5
        else:
            break  # step underflow: no further progress possible

    coef = w[1:] / sd
    intercept = float(w[0] - np.sum(w[1:] * mu / sd))
    return GlmModel(
        schema=schema,
        mode=mode,
        target=target,
        intercept=intercept,
        terms=tuple(zip(names, (float(c) for c in coef))),
    )


# ---------------------------------------------------------------------------
# Gradient boosting


@dataclass(frozen=True)
class GbmParams:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_node_size: int = 1
    col_sample: float = 1.0
    row_subsample: float = 1.0
    loss: str = "squared"  # "squared" | "logistic"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_node_size < 1:
            raise ConfigError("n_trees, max_depth and min_node_size must be >= 1")
        if not 0.0 < self.col_sample <= 1.0 or not 0.0 < self.row_subsample <= 1.0:
            raise ConfigError("col_sample and row_subsample must be in (0, 1]")
        if self.loss not in ("squared", "logistic"):
            raise ConfigError(f"unknown loss {self.loss!r}")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_node_size": self.min_node_size,
            "col_sample": self.col_sample,
            "row_subsample": self.row_subsample,
            "loss": self.loss,
            "seed": self.seed,
        }

    def replace(self, **changes) -> "GbmParams":
        doc = self.to_dict()
        doc.update(changes)
        return GbmParams(**doc)


@dataclass(frozen=True)
class GbmModel:
    """Stagewise additive ensemble of regression trees on loss gradients."""

    schema: tuple[FeatureSpec, ...]
    params: GbmParams
    target: str
    init_score: float
    trees: tuple[trees.TreeNode, ...]

    def predict(self, rows: Table, iterations: int | None = None) -> np.ndarray:
        """Score rows using the first ``iterations`` trees (default: all)."""
        _check_no_missing(rows, [s.name for s in self.schema], "prediction")
        X = _encode(rows, self.schema)
        return self._score(X, iterations)

    def _score(self, X: np.ndarray, iterations: int | None = None) -> np.ndarray:
        m = len(self.trees) if iterations is None else iterations
        if not 0 <= m <= len(self.trees):
            raise ConfigError(f"iterations must be in [0, {len(self.trees)}]")
        f = np.full(len(X), self.init_score)
        for tree in self.trees[:m]:
            f += self.params.learning_rate * trees.predict_tree(tree, X)
        if self.params.loss == "logistic":
            return _sigmoid(f)
        return f

    def staged_predict(self, rows: Table):
        """Yield predictions after each boosting stage (1..n_trees)."""
        X = _encode(rows, self.schema)
        f = np.full(len(X), self.init_score)
        for tree in self.trees:
            f += self.params.learning_rate * trees.predict_tree(tree, X)
            yield _sigmoid(f) if self.params.loss == "logistic" else f.copy()


def train_gbm(
    train: Table,
    target: str,
    params: GbmParams,
    features: Sequence[str] | None = None,
) -> GbmModel:
    if features is None:
        features = [n for n in train.names if n != target]
    if target in features:
        raise ConfigError(f"target {target!r} listed among features")
    if train.n_rows == 0:
        raise FitError("empty training table")
    if params.min_node_size >= train.n_rows:
        raise ConfigError(
            f"min_node_size {params.min_node_size} must be < n_rows {train.n_rows}"
        )
    _check_no_missing(train, list(features) + [target], "GBM training")

    tcol = train.column(target)
    if tcol.kind != NUMERIC:
        raise FitError(f"target {target!r} must be numeric (encode labels as 0/1)")
    y = tcol.values.astype(np.float64)
    if params.loss == "logistic" and not np.isin(y, (0.0, 1.0)).all():
        raise FitError("logistic loss requires a binary 0/1 target")

    schema = _schema_of(train, features)
    X = _encode(train, schema)
    kinds = [s.kind for s in schema]
    n, p = X.shape
    if p == 0:
        raise FitError("no feature columns to train on")

    if params.loss == "squared":
        init = float(y.mean())
    else:
        rate = min(max(float(y.mean()), 1e-12), 1 - 1e-12)
        init = math.log(rate / (1.0 - rate))

    rng = np.random.default_rng(params.seed)
    f = np.full(n, init)
    grown: list[trees.TreeNode] = []
    for _ in range(params.n_trees):
        residual = y - (_sigmoid(f) if params.loss == "logistic" else f)
        rows = np.arange(n)
        if params.row_subsample < 1.0:
            k = max(1, int(round(params.row_subsample * n)))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        cols = np.arange(p)
        if params.col_sample < 1.0:
            k = max(1, int(round(params.col_sample * p)))
            cols = np.sort(rng.choice(p, size=k, replace=False))
        tree = trees.grow_regression_tree(
            X[rows], kinds, residual[rows],
            max_depth=params.max_depth,
            min_node_size=params.min_node_size,
            columns=cols,
        )
        f += params.learning_rate * trees.predict_tree(tree, X)
        grown.append(tree)
    return GbmModel(schema=schema, params=params, target=target,
                    init_score=init, trees=tuple(grown))


# ---------------------------------------------------------------------------
# Wrapping arbitrary scorers


@dataclass(frozen=True)
class CallablePredictor:
    """Adapter turning any row-scoring function into a Predictor.

    ``fn`` receives a dict of column-value arrays (numeric: float64;
    categorical: arrays of level strings) and returns one float per row.
    """

    feature_names: tuple[str, ...]
    fn: Callable[[dict[str, np.ndarray]], np.ndarray]

    def predict(self, rows: Table) -> np.ndarray:
        arrays = {}
        for name in self.feature_names:
            c = rows.column(name)
            if c.kind == NUMERIC:
                arrays[name] = c.values.astype(np.float64)
            else:
                codes = c.values.astype(np.int64)
                arrays[name] = np.array([c.levels[k] if k >= 0 else "" for k in codes])
        out = np.asarray(self.fn(arrays), dtype=np.float64)
        if out.shape != (rows.n_rows,):
            raise ComputationError(
                f"predictor returned shape {out.shape}, expected ({rows.n_rows},)"
            )
        return out


# ---------------------------------------------------------------------------
# Metrics


def rmse(predictions, truth) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("rmse of empty sequences")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def residuals(model: Predictor, rows: Table, target: str) -> np.ndarray:
    """truth - prediction, row-aligned (pair with indices when plotting)."""
    truth = rows.column(target).values.astype(np.float64)
    return truth - model.predict(rows)


# ---------------------------------------------------------------------------
# Save / load


MODEL_FORMAT = "boxlens-model"
MODEL_FORMAT_VERSION = 1


def model_to_json(model) -> str:
    """Versioned JSON document for a trained model (stable byte layout)."""
    schema_doc = [
        {"name": s.name, "kind": s.kind, "levels": list(s.levels)} for s in model.schema
    ]
    if isinstance(model, GbmModel):
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "type": "gbm",
            "target": model.target,
            "schema": schema_doc,
            "params": model.params.to_dict(),
            "init_score": model.init_score,
            "trees": [t.to_dict() for t in model.trees],
        }
    elif isinstance(model, GlmModel):
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "type": "glm",
            "target": model.target,
            "schema": schema_doc,
            "mode": model.mode,
            "intercept": model.intercept,
            "terms": [[n, w] for n, w in model.terms],
        }
    else:
        raise ConfigError(f"cannot serialize model of type {type(model).__name__}")
    return json.dumps(doc, indent=2, sort_keys=True)


def model_from_json(text: str):
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise DataError("not a boxlens model document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('version')}")
    schema = tuple(
        FeatureSpec(s["name"], s["kind"], tuple(s["levels"])) for s in doc["schema"]
    )
    if doc["type"] == "gbm":
        return GbmModel(
            schema=schema,
            params=GbmParams(**doc["params"]),
            target=doc["target"],
            init_score=float(doc["init_score"]),
            trees=tuple(trees.TreeNode.from_dict(t) for t in doc["trees"]),
        )
    if doc["type"] == "glm":
        return GlmModel(
            schema=schema,
            mode=doc["mode"],
            target=doc["target"],
            intercept=float(doc["intercept"]),
            terms=tuple((n, float(w)) for n, w in doc["terms"]),
        )
    raise DataError(f"unknown model type {doc['type']!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return model_from_json(fh.read())
    except OSError as exc:
        raise DataError(f"cannot open model file {path}: {exc}") from exc
