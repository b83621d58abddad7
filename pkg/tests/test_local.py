import itertools
import math

import numpy as np
import pytest

from boxlens.anchors import (
    AnchorRule,
    anchor_explain,
    anchor_metrics,
    anchors_to_csv,
    candidate_predicates,
    hoeffding_lower_bound,
)
from boxlens.errors import ConfigError, DataError, KernelWidthError
from boxlens.lime import lime_explain
from boxlens.models import CallablePredictor, GbmParams, train_gbm
from boxlens.perturb import (
    Predicate,
    PerturbationSampler,
    gower_distance,
    instance_table,
    rule_mask,
)
from boxlens.shapley import shapley_exact, shapley_mc

from conftest import make_table


def predictor(names, fn):
    return CallablePredictor(feature_names=tuple(names), fn=fn)


def uniform_background(n=400, seed=0):
    rng = np.random.default_rng(seed)
    return make_table(x1=rng.uniform(0, 1, n), x2=rng.uniform(0, 1, n))


class TestPredicate:
    def test_relations(self):
        table = make_table(x=[0.0, 1.0, 2.0, None])
        col = table.column("x")
        assert list(Predicate("x", "<=", 1.0).mask(col)) == [True, True, False, False]
        assert list(Predicate("x", ">", 1.0).mask(col)) == [False, False, True, False]
        assert list(Predicate("x", "in", (0.5, 2.0)).mask(col)) == [False, True, True, False]
        assert list(Predicate("x", "==", 1.0).mask(col)) == [False, True, False, False]

    def test_categorical_equality(self):
        table = make_table(g=["a", "b", None, "a"])
        mask = Predicate("g", "==", "a").mask(table.column("g"))
        assert list(mask) == [True, False, False, True]

    def test_categorical_needs_equality(self):
        table = make_table(g=["a", "b"])
        with pytest.raises(ConfigError):
            Predicate("g", ">", "a").mask(table.column("g"))

    def test_bad_relation_and_interval(self):
        with pytest.raises(ConfigError):
            Predicate("x", "!=", 1.0)
        with pytest.raises(ConfigError):
            Predicate("x", "in", (2.0, 1.0))

    def test_dict_round_trip(self):
        for p in (Predicate("x", "in", (0.0, 1.0)), Predicate("g", "==", "a")):
            assert Predicate.from_dict(p.to_dict()) == p

    def test_rule_mask_intersects(self):
        table = make_table(x=[0.0, 1.0, 2.0], g=["a", "a", "b"])
        rule = [Predicate("x", ">", 0.5), Predicate("g", "==", "a")]
        assert list(rule_mask(table, rule)) == [False, True, False]


class TestSampler:
    def test_values_come_from_background(self):
        table = make_table(x1=[1.0, 2.0, 3.0], g=["a", "b", "a"])
        sampler = PerturbationSampler(table, ("x1", "g"))
        samples = sampler.sample(200, np.random.default_rng(0))
        assert set(samples.column("x1").values) <= {1.0, 2.0, 3.0}
        assert set(samples.column("g").decoded()) <= {"a", "b"}
        assert samples.column("g").levels == table.column("g").levels

    def test_conditioning_restricts_pool(self):
        table = make_table(x1=[1.0, 2.0, 3.0, 4.0])
        sampler = PerturbationSampler(table, ("x1",))
        samples = sampler.sample(100, np.random.default_rng(1), [Predicate("x1", ">", 2.5)])
        assert set(samples.column("x1").values) <= {3.0, 4.0}

    def test_empty_pool_raises(self):
        table = make_table(x1=[1.0, 2.0])
        sampler = PerturbationSampler(table, ("x1",))
        with pytest.raises(DataError):
            sampler.sample(10, np.random.default_rng(0), [Predicate("x1", ">", 9.0)])

    def test_missing_values_never_sampled(self):
        table = make_table(x1=[1.0, None, 3.0])
        sampler = PerturbationSampler(table, ("x1",))
        samples = sampler.sample(100, np.random.default_rng(2))
        assert not samples.column("x1").missing_mask.any()
        assert set(samples.column("x1").values) <= {1.0, 3.0}


class TestGower:
    def test_zero_at_instance(self):
        table = make_table(x1=[0.0, 1.0], g=["a", "b"])
        inst = instance_table(table, {"x1": 1.0, "g": "b"}, ("x1", "g"))
        d = gower_distance(inst, inst, ("x1", "g"), table)
        assert d[0] == 0.0

    def test_mixed_distance(self):
        table = make_table(x1=[0.0, 10.0], g=["a", "b"])
        inst = instance_table(table, {"x1": 0.0, "g": "a"}, ("x1", "g"))
        other = instance_table(table, {"x1": 5.0, "g": "b"}, ("x1", "g"))
        d = gower_distance(other, inst, ("x1", "g"), table)
        assert d[0] == pytest.approx((0.5 + 1.0) / 2)


class TestLime:
    def test_recovers_linear_weights(self):
        background = uniform_background(300, seed=1)
        model = predictor(["x1", "x2"], lambda a: 2.0 * a["x1"] - a["x2"] + 5.0)
        exp = lime_explain(model, background, {"x1": 0.5, "x2": 0.5},
                           k_features=2, n_samples=2000, seed=3)
        by_name = dict(zip(exp.features, exp.weights))
        assert by_name["x1"] == pytest.approx(2.0, rel=0.05)
        assert by_name["x2"] == pytest.approx(-1.0, rel=0.05)
        assert exp.intercept == pytest.approx(5.0, rel=0.05)
        assert exp.fidelity > 0.99

    def test_constant_model_zero_weights(self):
        background = uniform_background(100, seed=2)
        model = predictor(["x1", "x2"], lambda a: np.full(len(a["x1"]), 6.5))
        exp = lime_explain(model, background, {"x1": 0.3, "x2": 0.7},
                           k_features=2, n_samples=500, seed=4)
        assert np.allclose(exp.weights, 0.0, atol=1e-9)
        assert exp.intercept == pytest.approx(6.5, abs=1e-9)
        assert exp.fidelity == 1.0

    def test_forward_selection_picks_strong_feature_first(self):
        background = uniform_background(300, seed=5)
        model = predictor(["x1", "x2"], lambda a: 10.0 * a["x1"] + 0.1 * a["x2"])
        exp = lime_explain(model, background, {"x1": 0.5, "x2": 0.5},
                           k_features=1, n_samples=1000, seed=6)
        assert exp.features == ("x1",)
        assert len(exp.weights) == 1

    def test_categorical_indicator_weight(self):
        rng = np.random.default_rng(7)
        background = make_table(
            g=list(rng.choice(["a", "b"], size=200)),
            x=rng.uniform(0, 1, 200),
        )
        model = predictor(["g", "x"], lambda a: (a["g"] == "a").astype(float))
        exp = lime_explain(model, background, {"g": "a", "x": 0.5},
                           k_features=2, n_samples=1000, seed=8)
        by_name = dict(zip(exp.features, exp.weights))
        assert by_name["g"] == pytest.approx(1.0, rel=0.05)

    def test_locality_improves_as_width_shrinks(self):
        # piecewise-linear: slope 1 left of 0.5, slope 4 to the right
        background = uniform_background(500, seed=9)
        fn = lambda a: np.where(a["x1"] <= 0.5, a["x1"], 0.5 + 4.0 * (a["x1"] - 0.5)) + 0.0 * a["x2"]
        model = predictor(["x1", "x2"], fn)
        errors = []
        for sigma in (1.0, 0.5, 0.25):
            exp = lime_explain(model, background, {"x1": 0.9, "x2": 0.5},
                               k_features=2, n_samples=4000,
                               kernel_width=sigma, seed=10)
            errors.append(abs(dict(zip(exp.features, exp.weights))["x1"] - 4.0))
        assert errors[0] > errors[1] > errors[2]

    def test_tiny_width_raises(self):
        background = uniform_background(100, seed=11)
        model = predictor(["x1", "x2"], lambda a: a["x1"])
        with pytest.raises(KernelWidthError):
            lime_explain(model, background, {"x1": 0.123456789, "x2": 0.5},
                         k_features=1, n_samples=200, kernel_width=1e-9, seed=12)

    def test_sample_floor_enforced(self):
        background = uniform_background(50, seed=13)
        model = predictor(["x1", "x2"], lambda a: a["x1"])
        with pytest.raises(ConfigError):
            lime_explain(model, background, {"x1": 0.5, "x2": 0.5},
                         k_features=1, n_samples=19)

    def test_deterministic(self):
        background = uniform_background(100, seed=14)
        model = predictor(["x1", "x2"], lambda a: a["x1"] * a["x2"])
        kw = dict(k_features=2, n_samples=400, seed=15)
        a = lime_explain(model, background, {"x1": 0.5, "x2": 0.5}, **kw)
        b = lime_explain(model, background, {"x1": 0.5, "x2": 0.5}, **kw)
        assert a == b

    def test_csv_and_json(self):
        background = uniform_background(80, seed=16)
        model = predictor(["x1", "x2"], lambda a: a["x1"])
        exp = lime_explain(model, background, {"x1": 0.5, "x2": 0.5},
                           k_features=1, n_samples=200, seed=17)
        assert exp.to_csv().splitlines()[0] == "feature,weight"
        assert '"method": "lime"' in exp.to_json()


def permutation_oracle(values, d):
    """Average marginal contributions over every feature ordering."""
    phi = np.zeros(d)
    orderings = list(itertools.permutations(range(d)))
    for order in orderings:
        mask = 0
        for f in order:
            phi[f] += values[mask | 1 << f] - values[mask]
            mask |= 1 << f
    return phi / len(orderings)


class TestShapleyExact:
    def test_additive_model_unit_attributions(self):
        background = make_table(x1=[0.0], x2=[0.0])
        model = predictor(["x1", "x2"], lambda a: a["x1"] + a["x2"])
        att = shapley_exact(model, background, {"x1": 1.0, "x2": 1.0})
        assert att.values == (1.0, 1.0)
        assert att.baseline == 0.0
        assert att.full_value == 2.0

    def test_symmetry(self):
        background = make_table(x1=[0.0, 3.0], x2=[0.0, 3.0])
        model = predictor(["x1", "x2"], lambda a: a["x1"] * a["x2"])
        att = shapley_exact(model, background, {"x1": 2.0, "x2": 2.0})
        assert att.values[0] == pytest.approx(att.values[1], abs=1e-9)

    def test_dummy_feature_zero(self):
        background = uniform_background(20, seed=18)
        model = predictor(["x1", "x2"], lambda a: np.sin(a["x1"]))
        att = shapley_exact(model, background, {"x1": 0.4, "x2": 0.9})
        assert att.values[att.features.index("x2")] == 0.0

    def test_matches_all_orderings_oracle_on_random_trees(self):
        rng = np.random.default_rng(19)
        for trial in range(5):
            cols = {f"x{i}": rng.normal(size=60) for i in range(1, 5)}
            cols["y"] = (cols["x1"] * cols["x2"] + np.sin(cols["x3"])
                         + rng.normal(scale=0.1, size=60))
            table = make_table(**cols)
            model = train_gbm(table, "y", GbmParams(n_trees=10, max_depth=3, seed=trial))
            background = table.drop("y").subset_rows(np.arange(12))
            instance = {f"x{i}": float(cols[f"x{i}"][30]) for i in range(1, 5)}
            att = shapley_exact(model, background, instance)

            from boxlens.perturb import instance_table as _it
            from boxlens.shapley import _splice
            inst = _it(background, instance, att.features)
            values = np.empty(16)
            for mask in range(16):
                names = [att.features[i] for i in range(4) if mask >> i & 1]
                values[mask] = float(np.mean(model.predict(_splice(background, inst, names))))
            oracle = permutation_oracle(values, 4)
            assert np.allclose(att.values, oracle, atol=1e-9)
            assert att.efficiency_gap < 1e-9

    def test_too_many_features(self):
        names = [f"x{i}" for i in range(13)]
        background = make_table(**{n: [0.0, 1.0] for n in names})
        model = predictor(names, lambda a: a["x0"])
        with pytest.raises(ConfigError, match="shapley_mc"):
            shapley_exact(model, background, {n: 0.5 for n in names})


class TestShapleyMc:
    def test_agrees_with_exact_within_three_stderr(self):
        rng = np.random.default_rng(20)
        cols = {f"x{i}": rng.uniform(0, 1, 40) for i in range(1, 4)}
        background = make_table(**cols)
        model = predictor(list(cols), lambda a: a["x1"] * a["x2"] + a["x3"] ** 2)
        instance = {k: 0.8 for k in cols}
        exact = shapley_exact(model, background, instance)
        mc = shapley_mc(model, background, instance, n_samples=10_000, seed=21)
        for i in range(3):
            band = 3 * mc.stderr[i] + 1e-12
            assert abs(mc.values[i] - exact.values[i]) <= band

    def test_constant_model(self):
        background = uniform_background(30, seed=22)
        model = predictor(["x1", "x2"], lambda a: np.full(len(a["x1"]), 2.5))
        mc = shapley_mc(model, background, {"x1": 0.5, "x2": 0.5}, n_samples=50, seed=23)
        assert mc.values == (0.0, 0.0)
        assert mc.stderr == (0.0, 0.0)

    def test_efficiency_within_band(self):
        background = uniform_background(50, seed=24)
        model = predictor(["x1", "x2"], lambda a: np.exp(a["x1"]) + a["x1"] * a["x2"])
        mc = shapley_mc(model, background, {"x1": 0.9, "x2": 0.1},
                        n_samples=4000, seed=25)
        assert mc.efficiency_gap <= 3 * sum(mc.stderr) + 1e-12

    def test_deterministic(self):
        background = uniform_background(30, seed=26)
        model = predictor(["x1", "x2"], lambda a: a["x1"])
        kw = dict(n_samples=100, seed=27)
        a = shapley_mc(model, background, {"x1": 0.5, "x2": 0.5}, **kw)
        b = shapley_mc(model, background, {"x1": 0.5, "x2": 0.5}, **kw)
        assert a == b

    def test_sample_floor(self):
        background = uniform_background(10, seed=28)
        model = predictor(["x1", "x2"], lambda a: a["x1"])
        with pytest.raises(ConfigError):
            shapley_mc(model, background, {"x1": 0.5, "x2": 0.5}, n_samples=5)

    def test_csv_has_stderr_column(self):
        background = uniform_background(20, seed=29)
        model = predictor(["x1", "x2"], lambda a: a["x1"])
        mc = shapley_mc(model, background, {"x1": 0.5, "x2": 0.5}, n_samples=50, seed=30)
        assert mc.to_csv().splitlines()[0] == "feature,phi,stderr"


def stump_model():
    return predictor(["x1", "x2"], lambda a: (a["x1"] > 0.5).astype(float))


class TestAnchors:
    def test_stump_anchor_contains_upper_interval(self):
        background = uniform_background(2000, seed=31)
        rule = anchor_explain(stump_model(), background, {"x1": 0.9, "x2": 0.5},
                              tau=0.95, n_samples_per_eval=1000, seed=32)
        assert rule.satisfied
        assert rule.label == 1
        feats = [p.feature for p in rule.predicates]
        assert "x1" in feats
        p = rule.predicates[feats.index("x1")]
        lo, hi = p.value
        assert lo > 0.5
        assert rule.precision == 1.0
        assert rule.coverage == pytest.approx(0.25, abs=0.05)

    def test_tiny_tau_returns_empty_rule(self):
        background = uniform_background(500, seed=33)
        rule = anchor_explain(stump_model(), background, {"x1": 0.9, "x2": 0.5},
                              tau=0.05, n_samples_per_eval=1000, seed=34)
        assert rule.predicates == ()
        assert rule.satisfied

    def test_instance_satisfies_every_predicate(self):
        background = uniform_background(800, seed=35)
        instance = {"x1": 0.6, "x2": 0.2}
        rule = anchor_explain(stump_model(), background, instance,
                              tau=0.9, n_samples_per_eval=500, seed=36)
        for p in rule.predicates:
            assert p.holds(instance[p.feature], background.column(p.feature))

    def test_unreachable_tau_flagged_unsatisfied(self):
        rng = np.random.default_rng(37)
        background = make_table(x1=rng.uniform(0, 1, 400), x2=rng.uniform(0, 1, 400))
        noisy = predictor(["x1", "x2"],
                          lambda a: (np.floor(a["x1"] * 97) % 2).astype(float))
        rule = anchor_explain(noisy, background, {"x1": 0.51, "x2": 0.5},
                              tau=0.99, n_samples_per_eval=400, seed=38)
        assert not rule.satisfied
        assert len(rule.predicates) == 2

    def test_coverage_never_increases_with_more_predicates(self):
        background = uniform_background(1000, seed=39)
        instance = {"x1": 0.9, "x2": 0.1}
        cands = candidate_predicates(background, instance, ("x1", "x2"))
        prev = 1.0
        rule = []
        for p in cands:
            rule.append(p)
            cov = float(np.mean(rule_mask(background, rule)))
            assert cov <= prev + 1e-12
            prev = cov

    def test_categorical_candidates_use_equality(self):
        background = make_table(g=["a", "b", "a", "c"], x=[0.0, 1.0, 2.0, 3.0])
        cands = candidate_predicates(background, {"g": "a", "x": 1.5}, ("g", "x"))
        assert cands[0] == Predicate("g", "==", "a")
        assert cands[1].relation == "in"

    def test_out_of_range_instance_widens_interval(self):
        background = make_table(x=[0.0, 1.0, 2.0, 3.0, 4.0])
        (p,) = candidate_predicates(background, {"x": 9.0}, ("x",))
        lo, hi = p.value
        assert hi == 9.0

    def test_deterministic(self):
        background = uniform_background(300, seed=40)
        kw = dict(tau=0.9, n_samples_per_eval=300, seed=41)
        a = anchor_explain(stump_model(), background, {"x1": 0.8, "x2": 0.3}, **kw)
        b = anchor_explain(stump_model(), background, {"x1": 0.8, "x2": 0.3}, **kw)
        assert a == b

    def test_bad_tau(self):
        background = uniform_background(50, seed=42)
        with pytest.raises(ConfigError):
            anchor_explain(stump_model(), background, {"x1": 0.8, "x2": 0.3}, tau=1.0)


class TestAnchorMetrics:
    def test_stump_precision_near_one(self):
        background = uniform_background(3000, seed=43)
        rule = anchor_explain(stump_model(), background, {"x1": 0.9, "x2": 0.5},
                              tau=0.95, n_samples_per_eval=1000, seed=44)
        precision, coverage = anchor_metrics(rule, stump_model(), background,
                                             n_samples=10_000, seed=45)
        assert precision == pytest.approx(1.0, abs=0.02)
        assert coverage == rule.coverage

    def test_rule_satisfied_by_all_rows(self):
        background = uniform_background(100, seed=46)
        rule = AnchorRule(predicates=(Predicate("x1", "in", (-1.0, 2.0)),),
                          precision=1.0, coverage=1.0, n_samples=0,
                          tau=0.9, label=1, satisfied=True)
        _, coverage = anchor_metrics(rule, stump_model(), background, n_samples=100)
        assert coverage == 1.0

    def test_contradictory_rule_flags_undefined_precision(self):
        background = uniform_background(100, seed=47)
        rule = AnchorRule(
            predicates=(Predicate("x1", "<=", 1.0), Predicate("x1", ">", 1.0)),
            precision=0.0, coverage=0.0, n_samples=0, tau=0.9, label=1,
            satisfied=False,
        )
        precision, coverage = anchor_metrics(rule, stump_model(), background, n_samples=50)
        assert math.isnan(precision)
        assert coverage == 0.0

    def test_hoeffding_bound_shrinks_with_samples(self):
        assert hoeffding_lower_bound(0.9, 100) < hoeffding_lower_bound(0.9, 10_000)

    def test_table_layout_csv(self):
        rule = AnchorRule(predicates=(Predicate("g", "==", "a"),),
                          precision=0.97, coverage=0.3, n_samples=500,
                          tau=0.9, label=1, satisfied=True)
        lines = anchors_to_csv([rule], cases=[7]).splitlines()
        assert lines[0] == "case,precision,coverage,rule"
        assert lines[1].startswith("7,0.97,0.3,")

    def test_rule_json_round_trip(self):
        rule = AnchorRule(
            predicates=(Predicate("x1", "in", (0.1, 0.9)), Predicate("g", "==", "b")),
            precision=0.99, coverage=0.4, n_samples=2000, tau=0.95, label=0,
            satisfied=True,
        )
        import json
        assert AnchorRule.from_dict(json.loads(rule.to_json())) == rule
