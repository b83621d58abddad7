"""Local surrogate explanations: a sparse weighted linear fit to the
model's behaviour in a neighbourhood of one instance."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, Table
from .errors import ConfigError, KernelWidthError
from .perturb import (
    PerturbationSampler,
    feature_names_of,
    gower_distance,
    instance_table,
)


@dataclass(frozen=True)
class LimeExplanation:
    instance_index: int
    features: tuple[str, ...]  # selected, in selection order
    weights: tuple[float, ...]
    intercept: float
    kernel_width: float
    n_samples: int
    fidelity: float  # weighted R^2 of the surrogate on its own sample
    seed: int

    def to_dict(self) -> dict:
        return {
            "method": "lime",
            "instance_index": self.instance_index,
            "features": list(self.features),
            "weights": list(self.weights),
            "intercept": self.intercept,
            "kernel_width": self.kernel_width,
            "n_samples": self.n_samples,
            "fidelity": self.fidelity,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature", "weight"])
        for f, w in zip(self.features, self.weights):
            writer.writerow([f, repr(w)])
        return buf.getvalue()


def default_kernel_width(n_features: int) -> float:
    return 0.75 * float(np.sqrt(n_features))


def _surrogate_design(samples: Table, instance: Table, features) -> np.ndarray:
    """Numeric features enter raw; categoricals as same-level-as-instance."""
    cols = []
    for name in features:
        c = samples.column(name)
        if c.kind == CATEGORICAL:
            cols.append((c.values == instance.column(name).values[0]).astype(np.float64))
        else:
            cols.append(c.values.astype(np.float64))
    return np.column_stack(cols)


def _wls(design: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Weighted least squares with intercept; returns (coefs, weighted SSE)."""
    sw = np.sqrt(w)
    X = np.column_stack([np.ones(len(y)), design]) * sw[:, None]
    beta, *_ = np.linalg.lstsq(X, y * sw, rcond=None)
    resid = y * sw - X @ beta
    return beta, float(resid @ resid)


def lime_explain(
    model,
    background: Table,
    instance: dict,
    k_features: int,
    n_samples: int = 1000,
    kernel_width: float | None = None,
    seed: int = 0,
    instance_index: int = -1,
) -> LimeExplanation:
    """Fit a K-sparse linear surrogate around one instance.

    Perturbations come from background marginals, weighted by
    exp(-d^2 / sigma^2) with d the Gower distance to the instance. Sparsity
    is hard: forward selection picks K features, then a weighted
    least-squares fit gives their local weights. Fidelity is the weighted
    R^2 of that fit, reported as-is.
    """
    features = feature_names_of(model, background)
    d = len(features)
    if not 1 <= k_features <= d:
        raise ConfigError(f"k_features must be in [1, {d}], got {k_features}")
    if n_samples < 10 * d:
        raise ConfigError(f"n_samples must be >= 10 * n_features = {10 * d}")
    sigma = default_kernel_width(d) if kernel_width is None else float(kernel_width)
    if sigma <= 0:
        raise KernelWidthError("kernel_width must be positive")

    inst = instance_table(background, instance, features)
    rng = np.random.default_rng(seed)
    sampler = PerturbationSampler(background, features)
    samples = sampler.sample(n_samples, rng)

    dist = gower_distance(samples, inst, features, background)
    w = np.exp(-(dist ** 2) / sigma ** 2)
    if float(np.max(w)) < 1e-12:
        raise KernelWidthError(
            f"all perturbation weights are ~0 at kernel_width={sigma:g}; "
            "increase kernel_width"
        )

    y = model.predict(samples)
    design = _surrogate_design(samples, inst, features)

    selected: list[int] = []
    remaining = list(range(d))
    for _ in range(k_features):
        best_j, best_sse = remaining[0], np.inf
        for j in remaining:
            _, sse = _wls(design[:, selected + [j]], y, w)
            if sse < best_sse:
                best_j, best_sse = j, sse
        selected.append(best_j)
        remaining.remove(best_j)

    beta, sse = _wls(design[:, selected], y, w)
    ybar = float(np.sum(w * y) / np.sum(w))
    sst = float(np.sum(w * (y - ybar) ** 2))
    tiny = np.finfo(np.float64).eps * float(np.sum(w)) * max(1.0, ybar * ybar)
    if sst > tiny:
        fidelity = min(1.0, max(0.0, 1.0 - sse / sst))
    else:
        # constant response: the intercept-only fit is already perfect
        fidelity = 1.0 if sse <= tiny else 0.0

    return LimeExplanation(
        instance_index=instance_index,
        features=tuple(features[j] for j in selected),
        weights=tuple(float(b) for b in beta[1:]),
        intercept=float(beta[0]),
        kernel_width=sigma,
        n_samples=n_samples,
        fidelity=fidelity,
        seed=seed,
    )
