"""Metrics, fold plans, and nested cross-validation."""

import json

import numpy as np
import pytest

from enmkl.errors import DataError
from enmkl.evaluation import (
    CvReport,
    FoldPlan,
    HyperGrid,
    _pick_best,
    auc,
    balanced_accuracy,
    make_fold_plan,
    mse,
    nested_cv,
    pearson_correlation,
)
from enmkl.kernels import StackPreprocessor, build_linear_cross_kernels, build_linear_kernels
from enmkl.mkl import predict_model, train_enmkl_svm

from helpers import make_classification_data, make_regression_data


class TestBalancedAccuracy:
    def test_unequal_class_recalls(self):
        predicted = np.array([1.0, 1.0, 1.0, -1.0])
        truth = np.array([1.0, 1.0, -1.0, -1.0])
        assert balanced_accuracy(predicted, truth) == pytest.approx(0.75)

    def test_perfect_and_inverted(self):
        truth = np.array([1.0, -1.0, 1.0, -1.0])
        assert balanced_accuracy(truth, truth) == 1.0
        assert balanced_accuracy(-truth, truth) == 0.0

    def test_ignores_class_imbalance(self):
        # 9 of 10 in one class; majority voting scores only 0.5.
        truth = np.array([1.0] * 9 + [-1.0])
        predicted = np.ones(10)
        assert balanced_accuracy(predicted, truth) == pytest.approx(0.5)

    def test_sign_relabeling_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            truth = np.where(rng.random(12) < 0.5, 1.0, -1.0)
            if np.unique(truth).size < 2:
                continue
            predicted = np.where(rng.random(12) < 0.5, 1.0, -1.0)
            assert balanced_accuracy(predicted, truth) == pytest.approx(
                balanced_accuracy(-predicted, -truth)
            )

    def test_single_class_truth_rejected(self):
        with pytest.raises(DataError, match="both classes"):
            balanced_accuracy(np.array([1.0, -1.0]), np.array([1.0, 1.0]))


class TestAuc:
    def test_three_of_four_pairs_ordered(self):
        decisions = np.array([0.9, 0.4, 0.3, 0.1])
        truth = np.array([1.0, -1.0, 1.0, -1.0])
        assert auc(decisions, truth) == pytest.approx(0.75)

    def test_perfect_ranking(self):
        decisions = np.array([2.0, 1.0, -1.0, -2.0])
        truth = np.array([1.0, 1.0, -1.0, -1.0])
        assert auc(decisions, truth) == 1.0

    def test_all_tied_scores_half(self):
        decisions = np.zeros(6)
        truth = np.array([1.0, 1.0, 1.0, -1.0, -1.0, -1.0])
        assert auc(decisions, truth) == pytest.approx(0.5)

    def test_single_crossed_tie(self):
        # One positive tied with one negative: that pair counts 1/2.
        decisions = np.array([1.0, 0.5, 0.5])
        truth = np.array([1.0, 1.0, -1.0])
        assert auc(decisions, truth) == pytest.approx(0.75)

    def test_invariant_under_monotone_transforms(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            decisions = rng.normal(size=14)
            truth = np.where(rng.random(14) < 0.5, 1.0, -1.0)
            if np.unique(truth).size < 2:
                continue
            base = auc(decisions, truth)
            assert auc(3.0 * decisions + 7.0, truth) == pytest.approx(base)
            assert auc(np.tanh(decisions), truth) == pytest.approx(base)

    def test_complement_under_negation(self):
        decisions = np.array([0.9, 0.4, 0.3, 0.1])
        truth = np.array([1.0, -1.0, 1.0, -1.0])
        assert auc(-decisions, truth) == pytest.approx(1.0 - 0.75)


class TestRegressionMetrics:
    def test_mse_hand_case(self):
        assert mse([1.0, 2.0, 3.0], [1.0, 1.0, 4.0]) == pytest.approx(2.0 / 3.0)

    def test_mse_zero_on_exact(self):
        values = np.array([0.5, -1.5, 2.0])
        assert mse(values, values) == 0.0

    def test_pearson_exact_linear(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert pearson_correlation(2.0 * x + 1.0, x) == pytest.approx(1.0)
        assert pearson_correlation(-x, x) == pytest.approx(-1.0)

    def test_pearson_zero_variance_rejected(self):
        with pytest.raises(DataError, match="zero variance"):
            pearson_correlation(np.ones(4), np.array([1.0, 2.0, 3.0, 4.0]))

    def test_pearson_symmetric(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=10), rng.normal(size=10)
        assert pearson_correlation(a, b) == pytest.approx(pearson_correlation(b, a))


class TestHyperGrid:
    def test_defaults_span_the_documented_ranges(self):
        grid = HyperGrid()
        np.testing.assert_allclose(grid.c_values, [10.0 ** e for e in range(-3, 4)])
        np.testing.assert_allclose(grid.mu_values, [i / 10 for i in range(1, 11)])

    def test_rejects_empty_axes(self):
        with pytest.raises(ValueError, match="empty"):
            HyperGrid(c_values=())

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError, match="positive"):
            HyperGrid(c_values=(0.0,))
        with pytest.raises(ValueError):
            HyperGrid(mu_values=(1.5,))


class TestFoldPlans:
    def test_equal_sized_partition(self):
        ids = [f"s{i}" for i in range(10)]
        plan = make_fold_plan(ids, k_outer=5, k_inner=2, seed=3)
        test_sets = [set(test) for _, test in plan.outer_folds]
        assert all(len(t) == 2 for t in test_sets)
        assert set().union(*test_sets) == set(ids)

    def test_deterministic_and_seed_sensitive(self):
        ids = [f"s{i}" for i in range(15)]
        a = make_fold_plan(ids, 3, 2, seed=7)
        b = make_fold_plan(ids, 3, 2, seed=7)
        c = make_fold_plan(ids, 3, 2, seed=8)
        assert a.outer_folds == b.outer_folds
        assert a.inner_folds == b.inner_folds
        assert a.outer_folds != c.outer_folds

    def test_fold_ids_keep_dataset_order(self):
        ids = [f"s{i:02d}" for i in range(12)]
        position = {i: p for p, i in enumerate(ids)}
        plan = make_fold_plan(ids, 4, 2, seed=5)
        for train, test in plan.outer_folds:
            assert list(train) == sorted(train, key=position.__getitem__)
            assert list(test) == sorted(test, key=position.__getitem__)

    def test_stratification_keeps_both_classes(self):
        ids = [f"s{i}" for i in range(12)]
        labels = [1.0] * 6 + [-1.0] * 6
        plan = make_fold_plan(ids, 3, 2, seed=0, labels=labels)
        label_of = dict(zip(ids, labels))
        for _, test in plan.outer_folds:
            seen = {label_of[i] for i in test}
            assert seen == {1.0, -1.0}
            assert len(test) == 4

    def test_stratified_inner_folds_too(self):
        ids = [f"s{i}" for i in range(16)]
        labels = [1.0] * 8 + [-1.0] * 8
        plan = make_fold_plan(ids, 4, 3, seed=1, labels=labels)
        label_of = dict(zip(ids, labels))
        for inner in plan.inner_folds:
            for _, val in inner:
                assert {label_of[i] for i in val} == {1.0, -1.0}

    def test_blocks_never_split(self):
        ids = [f"s{i}" for i in range(12)]
        blocks = [f"b{i // 2}" for i in range(12)]
        plan = make_fold_plan(ids, 3, 2, blocks=blocks, seed=2)
        block_of = dict(zip(ids, blocks))
        for (train, test), inner in zip(plan.outer_folds, plan.inner_folds):
            assert {block_of[i] for i in train}.isdisjoint({block_of[i] for i in test})
            assert len(test) == 4
            for in_train, in_val in inner:
                assert {block_of[i] for i in in_train}.isdisjoint(
                    {block_of[i] for i in in_val}
                )

    def test_blocks_accept_mapping_or_sequence(self):
        ids = [f"s{i}" for i in range(8)]
        blocks = [f"b{i // 2}" for i in range(8)]
        a = make_fold_plan(ids, 2, 2, blocks=blocks, seed=4)
        b = make_fold_plan(ids, 2, 2, blocks=dict(zip(ids, blocks)), seed=4)
        assert a.outer_folds == b.outer_folds

    def test_too_few_units_rejected(self):
        ids = [f"s{i}" for i in range(13)]
        blocks = [f"b{i % 4}" for i in range(13)]
        with pytest.raises(ValueError, match="exceeds the 4 available blocks"):
            make_fold_plan(ids, 5, 2, blocks=blocks)
        with pytest.raises(ValueError, match="exceeds the 13 available samples"):
            make_fold_plan(ids, 14, 2)

    def test_inner_folds_partition_outer_train(self):
        ids = [f"s{i}" for i in range(20)]
        plan = make_fold_plan(ids, 4, 3, seed=6)
        for (train, _), inner in zip(plan.outer_folds, plan.inner_folds):
            vals = [set(v) for _, v in inner]
            assert set().union(*vals) == set(train)
            assert sum(len(v) for v in vals) == len(train)
            for in_train, in_val in inner:
                assert set(in_train) | set(in_val) == set(train)
                assert not set(in_train) & set(in_val)

    def test_plan_validation_catches_leakage(self):
        # An inner training set that reaches outside its outer fold's
        # training ids must be rejected outright.
        ids = ("a", "b", "c", "d")
        with pytest.raises(ValueError, match="inner folds must cover exactly"):
            FoldPlan(
                sample_ids=ids,
                outer_folds=((("a", "b"), ("c", "d")), (("c", "d"), ("a", "b"))),
                inner_folds=(
                    ((("a", "c"), ("b",)), (("b", "c"), ("a",))),
                    ((("c",), ("d",)), (("d",), ("c",))),
                ),
            )


class TestPickBest:
    def test_higher_accuracy_wins(self):
        scores = {(1.0, 0.2): 0.9, (0.1, 1.0): 0.8}
        assert _pick_best(scores, "classification") == (1.0, 0.2)

    def test_tie_goes_to_larger_mu(self):
        scores = {(1.0, 0.5): 0.8, (1.0, 1.0): 0.8}
        assert _pick_best(scores, "classification") == (1.0, 1.0)

    def test_remaining_tie_goes_to_smaller_c(self):
        scores = {(1.0, 1.0): 0.8, (0.1, 1.0): 0.8}
        assert _pick_best(scores, "classification") == (0.1, 1.0)

    def test_regression_minimizes(self):
        scores = {(1.0, 0.5): 0.2, (1.0, 1.0): 0.4}
        assert _pick_best(scores, "regression") == (1.0, 0.5)

    def test_baseline_candidates_have_no_mu(self):
        scores = {(1.0, None): 0.8, (0.1, None): 0.8}
        assert _pick_best(scores, "classification") == (0.1, None)


class TestNestedCv:
    def _data(self, seed=30):
        return make_classification_data(
            n=24, seed=seed,
            group_specs=[("sig", 3, "signal"), ("noise", 3, "noise")],
        )

    def test_single_candidate_matches_manual_composition(self):
        data = self._data()
        plan = make_fold_plan(data.sample_ids, 3, 2, seed=9, labels=data.targets)
        grid = HyperGrid(c_values=(1.0,), mu_values=(0.5,))
        report = nested_cv(data, "classification", plan, grid=grid, solver_tol=1e-6)

        for outcome, (train_ids, test_ids) in zip(report.folds, plan.outer_folds):
            train_data = data.subset(train_ids)
            eval_data = data.subset(test_ids)
            pre = StackPreprocessor().fit(build_linear_kernels(train_data))
            model = train_enmkl_svm(
                pre.train_stack_, train_data.targets, C=1.0, mu=0.5, solver_tol=1e-6
            )
            raw_cross, sims = build_linear_cross_kernels(
                train_data, eval_data.features, eval_data.sample_ids
            )
            decisions = predict_model(model, pre.transform_cross(raw_cross, sims))
            np.testing.assert_array_equal(outcome.decision_values, decisions)
            assert outcome.selected_c == 1.0 and outcome.selected_mu == 0.5
            np.testing.assert_array_equal(outcome.beta, model.beta)

    def test_each_sample_scored_exactly_once(self):
        data = self._data(31)
        plan = make_fold_plan(data.sample_ids, 4, 2, seed=10, labels=data.targets)
        grid = HyperGrid(c_values=(1.0,), mu_values=(1.0,))
        report = nested_cv(data, "classification", plan, grid=grid)
        pooled_ids = [i for o in report.folds for i in o.test_ids]
        assert sorted(pooled_ids) == sorted(data.sample_ids)

    def test_report_is_deterministic(self):
        data = self._data(32)
        plan = make_fold_plan(data.sample_ids, 3, 2, seed=11, labels=data.targets)
        grid = HyperGrid(c_values=(0.1, 1.0), mu_values=(0.5, 1.0))
        a = nested_cv(data, "classification", plan, grid=grid)
        b = nested_cv(data, "classification", plan, grid=grid)
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(
            b.to_dict(), sort_keys=True
        )

    def test_regression_report(self):
        data = make_regression_data(
            n=24, seed=33, group_specs=[("sig", 3, "signal"), ("noise", 3, "noise")]
        )
        plan = make_fold_plan(data.sample_ids, 3, 2, seed=12)
        grid = HyperGrid(c_values=(1.0, 10.0), mu_values=(0.5,))
        report = nested_cv(data, "regression", plan, grid=grid)
        assert set(report.pooled_metrics) == {"mse", "pearson_r"}
        assert report.pooled_metrics["mse"] >= 0.0
        assert len(report.folds) == 3

    def test_baseline_trainer_ignores_mu(self):
        data = self._data(34)
        plan = make_fold_plan(data.sample_ids, 3, 2, seed=13, labels=data.targets)
        grid = HyperGrid(c_values=(1.0,), mu_values=(0.2, 0.9))
        report = nested_cv(data, "classification", plan, grid=grid, trainer="sum-baseline")
        for outcome in report.folds:
            assert outcome.selected_mu is None
            np.testing.assert_allclose(outcome.beta, np.full(2, 0.5))

    def test_mu_zero_candidate_rejected_with_hint(self):
        data = self._data(35)
        plan = make_fold_plan(data.sample_ids, 3, 2, seed=14, labels=data.targets)
        grid = HyperGrid(c_values=(1.0,), mu_values=(0.0, 0.5))
        with pytest.raises(ValueError, match="sum-baseline"):
            nested_cv(data, "classification", plan, grid=grid)

    def test_single_class_inner_fold_skipped_not_fatal(self):
        data = make_classification_data(
            n=12, seed=36, group_specs=[("g", 2, "signal")]
        )
        # Hand-built plan: two of outer fold 0's three inner validation
        # sets hold one class only and contribute no score; the run must
        # still complete on the remaining mixed fold.
        pos = [i for i, t in zip(data.sample_ids, data.targets) if t > 0]
        neg = [i for i, t in zip(data.sample_ids, data.targets) if t < 0]
        outer_train = tuple(pos[:4] + neg[:4])
        outer_test = tuple(pos[4:] + neg[4:])

        def inner(val, within):
            return (tuple(i for i in within if i not in set(val)), tuple(val))

        plan = FoldPlan(
            sample_ids=tuple(data.sample_ids),
            outer_folds=(
                (outer_train, outer_test),
                (outer_test, outer_train),
            ),
            inner_folds=(
                (
                    inner(pos[:3], outer_train),
                    inner([pos[3], neg[0]], outer_train),
                    inner(neg[1:4], outer_train),
                ),
                (
                    inner([pos[4], neg[4]], outer_test),
                    inner([pos[5]], outer_test),
                    inner([neg[5]], outer_test),
                ),
            ),
        )
        grid = HyperGrid(c_values=(1.0,), mu_values=(1.0,))
        report = nested_cv(data, "classification", plan, grid=grid)
        assert len(report.folds) == 2

    def test_plan_dataset_mismatch_rejected(self):
        data = self._data(37)
        plan = make_fold_plan([f"x{i}" for i in range(24)], 3, 2, seed=15)
        with pytest.raises(ValueError, match="does not cover"):
            nested_cv(data, "classification", plan)

    def test_report_round_trip_preserves_structure(self):
        data = self._data(38)
        plan = make_fold_plan(data.sample_ids, 3, 2, seed=16, labels=data.targets)
        grid = HyperGrid(c_values=(1.0,), mu_values=(1.0,))
        report = nested_cv(data, "classification", plan, grid=grid)
        payload = json.loads(json.dumps(report.to_dict()))
        assert payload["task"] == "classification"
        assert payload["trainer"] == "enmkl"
        assert len(payload["folds"]) == 3
        assert payload["selected_count"] == report.selected_count
        np.testing.assert_allclose(payload["mean_beta"], report.mean_beta)
