"""Anchor rules: if-then conditions that lock a classification in place
with high probability under local perturbation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, Table
from .errors import ConfigError, DataError
from .perturb import (
    Predicate,
    PerturbationSampler,
    feature_names_of,
    instance_table,
    rule_mask,
)

HOEFFDING_DELTA = 0.05  # one-sided 95% confidence


@dataclass(frozen=True)
class AnchorRule:
    predicates: tuple[Predicate, ...]
    precision: float
    coverage: float
    n_samples: int  # total perturbations drawn while building
    tau: float
    label: int  # class the rule anchors
    satisfied: bool  # precision lower bound reached tau

    def describe(self) -> str:
        if not self.predicates:
            return "(empty rule)"
        return " AND ".join(p.describe() for p in self.predicates)

    def to_dict(self) -> dict:
        return {
            "method": "anchor",
            "predicates": [p.to_dict() for p in self.predicates],
            "precision": self.precision,
            "coverage": self.coverage,
            "n_samples": self.n_samples,
            "tau": self.tau,
            "label": self.label,
            "satisfied": self.satisfied,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "AnchorRule":
        return cls(
            predicates=tuple(Predicate.from_dict(p) for p in doc["predicates"]),
            precision=doc["precision"],
            coverage=doc["coverage"],
            n_samples=doc["n_samples"],
            tau=doc["tau"],
            label=doc["label"],
            satisfied=doc["satisfied"],
        )


def hoeffding_lower_bound(estimate: float, n: int, delta: float = HOEFFDING_DELTA) -> float:
    """One-sided lower confidence bound for a [0,1]-mean."""
    return estimate - math.sqrt(math.log(1.0 / delta) / (2.0 * n))


def _labels(model, table: Table, threshold: float) -> np.ndarray:
    return (model.predict(table) >= threshold).astype(np.int64)


def candidate_predicates(background: Table, instance: dict, features) -> list[Predicate]:
    """One candidate per feature, all satisfied by the instance.

    Categorical features propose equality with the instance's level;
    numeric features propose the background quartile interval containing
    the instance (widened if the instance falls outside the background
    range).
    """
    out = []
    for name in features:
        col = background.column(name)
        cell = instance[name]
        if col.kind == CATEGORICAL:
            out.append(Predicate(name, "==", str(cell)))
            continue
        x = float(cell)
        edges = np.unique(np.quantile(col.observed(), [0.0, 0.25, 0.5, 0.75, 1.0]))
        if len(edges) < 2:
            lo = hi = float(edges[0])
        else:
            k = int(np.clip(np.searchsorted(edges, x, side="left") - 1, 0, len(edges) - 2))
            lo, hi = float(edges[k]), float(edges[k + 1])
        out.append(Predicate(name, "in", (min(lo, x), max(hi, x))))
    return out


def anchor_explain(
    model,
    background: Table,
    instance: dict,
    tau: float,
    n_samples_per_eval: int = 1000,
    seed: int = 0,
    threshold: float = 0.5,
    instance_index: int = -1,
) -> AnchorRule:
    """Grow a rule bottom-up until it pins the model's label down.

    At each step the candidate predicate with the highest estimated
    precision joins the rule; growth stops once the one-sided 95%
    Hoeffding lower bound on precision reaches tau. If every candidate is
    used without reaching the bound, the full rule is returned flagged
    unsatisfied.
    """
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must be in (0, 1), got {tau}")
    if n_samples_per_eval < 1:
        raise ConfigError("n_samples_per_eval must be >= 1")
    features = feature_names_of(model, background)
    inst = instance_table(background, instance, features)
    label = int(_labels(model, inst, threshold)[0])

    sampler = PerturbationSampler(background, features)
    rng = np.random.default_rng(seed)
    drawn = 0

    def precision_of(predicates) -> float:
        nonlocal drawn
        samples = sampler.sample(n_samples_per_eval, rng, predicates)
        drawn += n_samples_per_eval
        return float(np.mean(_labels(model, samples, threshold) == label))

    chosen: list[Predicate] = []
    prec = precision_of(chosen)
    candidates = candidate_predicates(background, instance, features)
    while hoeffding_lower_bound(prec, n_samples_per_eval) < tau and candidates:
        scores = [precision_of(chosen + [c]) for c in candidates]
        best = int(np.argmax(scores))
        chosen.append(candidates.pop(best))
        prec = scores[best]

    satisfied = hoeffding_lower_bound(prec, n_samples_per_eval) >= tau
    coverage = float(np.mean(rule_mask(background, chosen)))
    rule = AnchorRule(
        predicates=tuple(chosen),
        precision=prec,
        coverage=coverage,
        n_samples=drawn,
        tau=tau,
        label=label,
        satisfied=satisfied,
    )
    for p in rule.predicates:
        if not p.holds(instance[p.feature], background.column(p.feature)):
            raise ConfigError(f"internal: instance violates {p.describe()}")
    return rule


def anchor_metrics(
    rule: AnchorRule,
    model,
    background: Table,
    n_samples: int = 1000,
    seed: int = 0,
    threshold: float = 0.5,
) -> tuple[float, float]:
    """Fresh (precision, coverage) estimates for an existing rule.

    A rule no background value can satisfy gets coverage 0 and NaN
    precision: the conditioned distribution is empty, so precision is
    undefined rather than zero.
    """
    coverage = float(np.mean(rule_mask(background, rule.predicates)))
    features = feature_names_of(model, background)
    sampler = PerturbationSampler(background, features)
    rng = np.random.default_rng(seed)
    try:
        samples = sampler.sample(n_samples, rng, rule.predicates)
    except DataError:
        return float("nan"), coverage
    precision = float(np.mean(_labels(model, samples, threshold) == rule.label))
    return precision, coverage


def anchors_to_csv(rules: list[AnchorRule], cases: list | None = None) -> str:
    """Per-case anchor summary: case, precision, coverage, rule text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case", "precision", "coverage", "rule"])
    if cases is None:
        cases = list(range(len(rules)))
    for case, rule in zip(cases, rules):
        writer.writerow([case, repr(rule.precision), repr(rule.coverage), rule.describe()])
    return buf.getvalue()
