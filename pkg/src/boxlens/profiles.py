"""Feature-effect profiles: partial dependence, ICE curves, and
accumulated local effects (first and second order).

All grids are quantile-placed so sparse tails carry proportionally few
evaluation points; each numeric profile also carries a decile rug so plots
can show where the data actually lives.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, NUMERIC, Table
from .errors import ConfigError, DataError

PROFILE_KINDS = ("pdp", "ice", "ice_centered", "ale1", "ale2")

ICE_SAMPLE_CAP = 500


@dataclass(frozen=True)
class Profile:
    """A set of curves over a shared grid.

    PDP and first-order ALE hold a single curve. ICE holds one curve per
    sampled row (curve_ids = row indices). Second-order ALE stores the
    surface as one curve per second-axis grid point (grid2), value[c, g]
    being the surface at (grid[g], grid2[c]).
    """

    kind: str
    features: tuple[str, ...]
    grid: tuple
    curves: np.ndarray
    curve_ids: tuple
    grid2: tuple = ()
    bin_counts: tuple[int, ...] = ()
    rug: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "curves", np.asarray(self.curves, dtype=np.float64))
        self.validate()

    def validate(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        if self.curves.ndim != 2 or self.curves.shape[1] != len(self.grid):
            raise ConfigError("each curve needs exactly one value per grid point")
        if len(self.curve_ids) != len(self.curves):
            raise ConfigError("curve_ids must label every curve")
        if self.kind == "ale2" and self.curves.shape[0] != len(self.grid2):
            raise ConfigError("second-order ALE needs one curve per grid2 point")
        if self.kind == "ale1":
            if len(self.bin_counts) != len(self.grid) - 1:
                raise ConfigError("ale1 needs one bin count per grid interval")
            v = self.curves[0]
            n = np.array(self.bin_counts, dtype=np.float64)
            mids = (v[:-1] + v[1:]) / 2.0
            wmean = float(np.sum(n * mids) / np.sum(n))
            scale = max(1.0, float(np.max(np.abs(v), initial=0.0)))
            if abs(wmean) > 1e-9 * scale:
                raise ConfigError(f"ale1 curve is not centered (weighted mean {wmean:g})")


# ---------------------------------------------------------------------------
# Grids

def quantile_grid(values: np.ndarray, size: int) -> np.ndarray:
    """Equidistant-probability quantiles, deduplicated."""
    if size < 2:
        raise ConfigError("grid_size must be >= 2")
    return np.unique(np.quantile(values, np.linspace(0.0, 1.0, size)))


def _deciles(values: np.ndarray) -> tuple[float, ...]:
    return tuple(float(q) for q in np.quantile(values, np.linspace(0.1, 0.9, 9)))


def _numeric_observed(table: Table, feature: str) -> np.ndarray:
    col = table.column(feature)
    obs = col.observed()
    if len(obs) == 0:
        raise DataError(f"column {feature!r} has no observed values")
    return obs.astype(np.float64)


def _forced_curve_matrix(model, data: Table, feature: str, grid) -> np.ndarray:
    """predictions[i, g] = model on row i with `feature` forced to grid[g]."""
    cols = []
    for g in grid:
        cols.append(model.predict(data.with_constant(feature, g)))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# PDP / ICE

def pdp(model, data: Table, feature: str, grid_size: int = 20) -> Profile:
    """Average prediction while one feature is swept over its grid.

    Numeric grids are quantiles of the observed values; categorical grids
    are the level set in dataset order.
    """
    col = data.column(feature)
    if col.kind == CATEGORICAL:
        grid: tuple = col.levels
        rug: tuple = ()
    else:
        obs = _numeric_observed(data, feature)
        grid = tuple(float(g) for g in quantile_grid(obs, grid_size))
        rug = _deciles(obs)
    matrix = _forced_curve_matrix(model, data, feature, grid)
    return Profile(
        kind="pdp",
        features=(feature,),
        grid=grid,
        curves=matrix.mean(axis=0, keepdims=True),
        curve_ids=(0,),
        rug=rug,
    )


def ice(
    model,
    data: Table,
    feature: str,
    grid_size: int = 20,
    sample: int | None = None,
    centered: bool = False,
    seed: int = 0,
) -> Profile:
    """One curve per row; rows beyond the cap are subsampled with `seed`.

    The plain-curve mean over all rows reproduces the PDP exactly; centered
    mode subtracts each curve's value at the first grid point so curve
    shapes can be compared regardless of level.
    """
    n = data.n_rows
    if sample is None:
        sample = min(ICE_SAMPLE_CAP, n)
    if not 1 <= sample <= n:
        raise ConfigError(f"sample must be in [1, {n}], got {sample}")
    col = data.column(feature)
    if col.kind == CATEGORICAL:
        grid: tuple = col.levels
        rug: tuple = ()
    else:
        obs = _numeric_observed(data, feature)
        grid = tuple(float(g) for g in quantile_grid(obs, grid_size))
        rug = _deciles(obs)
    if sample < n:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n, size=sample, replace=False))
    else:
        idx = np.arange(n)
    matrix = _forced_curve_matrix(model, data.subset_rows(idx), feature, grid)
    if centered:
        matrix = matrix - matrix[:, :1]
    return Profile(
        kind="ice_centered" if centered else "ice",
        features=(feature,),
        grid=grid,
        curves=matrix,
        curve_ids=tuple(int(i) for i in idx),
        rug=rug,
    )


# ---------------------------------------------------------------------------
# ALE

def _ale_edges(x: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Quantile bin edges plus per-row bin assignment.

    Duplicate edges collapse and empty bins are merged into their left
    neighbor, so every returned bin is populated.
    """
    if n_bins < 1:
        raise ConfigError("n_bins must be >= 1")
    distinct = len(np.unique(x))
    if distinct < 2:
        raise ConfigError("ALE needs at least 2 distinct feature values")
    if n_bins > distinct:
        raise ConfigError(f"n_bins ({n_bins}) exceeds distinct values ({distinct})")
    edges = np.unique(np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1)))
    while True:
        k = len(edges) - 1
        idx = np.clip(np.searchsorted(edges, x, side="left") - 1, 0, k - 1)
        counts = np.bincount(idx, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if len(empty) == 0:
            return edges, idx
        # drop the edge separating the first empty bin from its left
        # neighbor (bin 0 merges right instead)
        e = int(empty[0])
        edges = np.delete(edges, e if e > 0 else 1)


def ale_first_order(model, data: Table, feature: str, n_bins: int = 10) -> Profile:
    """Accumulated local effects over quantile bins.

    Within each bin the effect is the mean prediction change when sliding
    the feature from the bin's lower to upper edge, with every other column
    held at its actual value; accumulated effects are vertically centered
    by the population-weighted mean.
    """
    col = data.column(feature)
    if col.kind != NUMERIC:
        raise ConfigError(f"ALE requires a numeric feature, got {feature!r}")
    if col.missing_mask.any():
        raise DataError(f"column {feature!r} has missing values; impute first")
    x = col.values.astype(np.float64)
    edges, idx = _ale_edges(x, n_bins)
    k = len(edges) - 1
    counts = np.bincount(idx, minlength=k)

    lower = model.predict(data.replace_column(col.replace_values(edges[idx])))
    upper = model.predict(data.replace_column(col.replace_values(edges[idx + 1])))
    local = np.bincount(idx, weights=upper - lower, minlength=k) / counts

    curve = np.concatenate([[0.0], np.cumsum(local)])
    mids = (curve[:-1] + curve[1:]) / 2.0
    curve = curve - np.sum(counts * mids) / len(x)
    return Profile(
        kind="ale1",
        features=(feature,),
        grid=tuple(float(e) for e in edges),
        curves=curve[None, :],
        curve_ids=(0,),
        bin_counts=tuple(int(c) for c in counts),
        rug=_deciles(x),
    )


def _nearest_fill(delta: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Give empty cells the effect of the nearest populated cell."""
    if (counts > 0).all():
        return delta
    filled = delta.copy()
    pop = np.argwhere(counts > 0)
    for i, j in np.argwhere(counts == 0):
        d2 = (pop[:, 0] - i) ** 2 + (pop[:, 1] - j) ** 2
        pi, pj = pop[int(np.argmin(d2))]
        filled[i, j] = delta[pi, pj]
    return filled


def ale_second_order(
    model,
    data: Table,
    features: tuple[str, str],
    n_bins: int = 10,
) -> Profile:
    """Interaction surface: accumulated second-order local effects.

    Double-differences of predictions across each 2-D quantile cell are
    averaged, doubly accumulated, and stripped of both count-weighted
    first-order margins, leaving only what the two features do jointly.
    """
    f1, f2 = features
    c1, c2 = data.column(f1), data.column(f2)
    for f, c in ((f1, c1), (f2, c2)):
        if c.kind != NUMERIC:
            raise ConfigError(f"ALE requires numeric features, got {f!r}")
        if c.missing_mask.any():
            raise DataError(f"column {f!r} has missing values; impute first")
    x1 = c1.values.astype(np.float64)
    x2 = c2.values.astype(np.float64)
    e1, i1 = _ale_edges(x1, n_bins)
    e2, i2 = _ale_edges(x2, n_bins)
    k1, k2 = len(e1) - 1, len(e2) - 1
    n = data.n_rows

    def f(v1, v2):
        forced = data.replace_column(c1.replace_values(v1))
        forced = forced.replace_column(c2.replace_values(v2))
        return model.predict(forced)

    dd = (f(e1[i1 + 1], e2[i2 + 1]) - f(e1[i1], e2[i2 + 1])) \
        - (f(e1[i1 + 1], e2[i2]) - f(e1[i1], e2[i2]))
    counts = np.zeros((k1, k2))
    np.add.at(counts, (i1, i2), 1.0)
    sums = np.zeros((k1, k2))
    np.add.at(sums, (i1, i2), dd)
    with np.errstate(invalid="ignore"):
        delta = sums / counts
    delta = _nearest_fill(delta, counts)

    surface = np.zeros((k1 + 1, k2 + 1))
    surface[1:, 1:] = np.cumsum(np.cumsum(delta, axis=0), axis=1)

    # remove first-order margins, weighting by cell population
    d1 = surface[1:, :] - surface[:-1, :]
    m1 = np.sum(counts * (d1[:, :-1] + d1[:, 1:]) / 2.0, axis=1) / counts.sum(axis=1)
    d2 = surface[:, 1:] - surface[:, :-1]
    m2 = np.sum(counts * (d2[:-1, :] + d2[1:, :]) / 2.0, axis=0) / counts.sum(axis=0)
    surface = surface - np.concatenate([[0.0], np.cumsum(m1)])[:, None]
    surface = surface - np.concatenate([[0.0], np.cumsum(m2)])[None, :]

    cell_avg = (surface[:-1, :-1] + surface[:-1, 1:]
                + surface[1:, :-1] + surface[1:, 1:]) / 4.0
    surface = surface - np.sum(counts * cell_avg) / n

    return Profile(
        kind="ale2",
        features=(f1, f2),
        grid=tuple(float(e) for e in e1),
        grid2=tuple(float(e) for e in e2),
        curves=surface.T,
        curve_ids=tuple(float(e) for e in e2),
        bin_counts=tuple(int(c) for c in counts.ravel()),
    )


# ---------------------------------------------------------------------------
# Serialization

def profile_to_csv(profile: Profile) -> str:
    """Long format: feature, grid_value, curve_id, value.

    Rug marks (decile positions) are appended with curve_id "rug" and an
    empty value field so plotting tools can filter them out trivially.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["feature", "grid_value", "curve_id", "value"])
    feature = ":".join(profile.features)
    for ci, cid in enumerate(profile.curve_ids):
        for gi, g in enumerate(profile.grid):
            writer.writerow([feature, _cell(g), _cell(cid), repr(float(profile.curves[ci, gi]))])
    for mark in profile.rug:
        writer.writerow([feature, repr(float(mark)), "rug", ""])
    return buf.getvalue()


def write_profile_csv(profile: Profile, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(profile_to_csv(profile))


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
