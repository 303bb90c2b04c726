import numpy as np
import pytest
from scipy.special import expit

from metspredict.ingest import Dataset, FeatureSchema
from metspredict.models import (
    ConfusionMatrix,
    DataError,
    DecisionTreeClassifier,
    FitError,
    GradientBoostedTreesClassifier,
    LogisticRegressionClassifier,
    Metrics,
    ModelSpec,
    RandomForestClassifier,
    evaluate,
    load_model,
    save_model,
)
from metspredict.models.linear import logreg_grad, logreg_loss

from conftest import toy_dataset

ALL_KINDS = ["decision_tree", "random_forest", "gbt", "logreg"]


def separable_toy(n=40, seed=0):
    """Linearly separable 2-d set with margin >= 1 around x0 + x1 = 0."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    shift = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X[:, 0] += 2.0 * shift  # pushes the two classes at least 1 apart
    y = (shift > 0).astype(int)
    X[y == 1] += 0.5
    X[y == 0] -= 0.5
    return X, y


class TestFitBasics:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_separable_toy_reaches_training_accuracy_one(self, kind):
        X, y = separable_toy()
        model = ModelSpec(kind, {"n_trees": 20} if kind == "random_forest" else {})(0)
        model.fit(X, y)
        assert (model.predict(X) == y).all()

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_constant_label_predicts_that_label(self, kind):
        X = np.random.default_rng(0).normal(size=(12, 3))
        for label in (0, 1):
            y = np.full(12, label)
            model = ModelSpec(kind, {"n_trees": 5} if kind == "random_forest" else {})(0)
            model.fit(X, y)
            assert (model.predict(X) == label).all()

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_empty_train_is_fit_error(self, kind):
        with pytest.raises(FitError):
            ModelSpec(kind)(0).fit(np.empty((0, 2)), np.empty(0))

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_non_finite_feature_is_data_error(self, kind):
        X = np.ones((4, 2))
        X[1, 0] = np.nan
        with pytest.raises(DataError):
            ModelSpec(kind)(0).fit(X, np.array([0, 1, 0, 1]))

    def test_unknown_kind_rejected(self):
        with pytest.raises(FitError, match="unknown model kind"):
            ModelSpec("tabnet")


class TestGradientBoosting:
    def test_zero_rounds_predicts_prior_log_odds(self):
        X = np.random.default_rng(1).normal(size=(10, 2))
        y = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
        model = GradientBoostedTreesClassifier(n_rounds=0).fit(X, y)
        np.testing.assert_allclose(model.predict_proba(X), 0.3, atol=1e-12)

    def test_hand_computed_single_split(self):
        # 4 points on a line, one depth-1 tree, unit learning rate, no
        # regularization: base log-odds 0, g = p - y, h = p(1-p) with p=0.5,
        # best split at 1.5 gives leaf weights -GL/HL = -2 and +2, so the
        # probabilities are sigmoid(-2) and sigmoid(+2).
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        model = GradientBoostedTreesClassifier(
            n_rounds=1, max_depth=1, learning_rate=1.0, reg_lambda=0.0
        ).fit(X, y)
        expected = expit(np.array([-2.0, -2.0, 2.0, 2.0]))
        np.testing.assert_allclose(model.predict_proba(X), expected, atol=1e-12)
        assert model.feat_[0][0] == 0
        assert model.thr_[0][0] == 1.5

    def test_training_loss_monotone_non_increasing(self):
        ds = toy_dataset(60, 30, gap=1.0, seed=5)
        model = GradientBoostedTreesClassifier(n_rounds=150).fit(ds.X, ds.y)
        losses = np.array(model.train_losses_)
        assert len(losses) == 151
        assert (np.diff(losses) <= 1e-12).all()

    def test_deterministic(self):
        ds = toy_dataset(40, 20)
        a = GradientBoostedTreesClassifier(n_rounds=30, seed=3).fit(ds.X, ds.y)
        b = GradientBoostedTreesClassifier(n_rounds=30, seed=3).fit(ds.X, ds.y)
        np.testing.assert_array_equal(a.predict_proba(ds.X), b.predict_proba(ds.X))

    def test_depth_bounds(self):
        with pytest.raises(FitError):
            GradientBoostedTreesClassifier(max_depth=0)
        with pytest.raises(FitError):
            GradientBoostedTreesClassifier(max_depth=13)


class TestRandomForest:
    def test_probability_is_vote_fraction(self):
        ds = toy_dataset(30, 15, gap=1.0, seed=2)
        model = RandomForestClassifier(n_trees=4, seed=1).fit(ds.X, ds.y)
        proba = model.predict_proba(ds.X)
        assert np.isin(proba, [0.0, 0.25, 0.5, 0.75, 1.0]).all()

    def test_single_tree_no_subsampling_equals_decision_tree(self):
        ds = toy_dataset(50, 25, gap=1.0, seed=7)
        forest = RandomForestClassifier(
            n_trees=1, bootstrap=False, max_features=None, seed=11
        ).fit(ds.X, ds.y)
        tree = DecisionTreeClassifier(seed=11).fit(ds.X, ds.y)
        np.testing.assert_array_equal(forest.predict(ds.X), tree.predict(ds.X))
        np.testing.assert_array_equal(forest.trees_[0].feature, tree.tree_.feature)
        np.testing.assert_array_equal(forest.trees_[0].threshold, tree.tree_.threshold)
        np.testing.assert_array_equal(forest.trees_[0].value, tree.tree_.value)

    def test_deterministic(self):
        ds = toy_dataset(40, 20)
        a = RandomForestClassifier(n_trees=10, seed=5).fit(ds.X, ds.y)
        b = RandomForestClassifier(n_trees=10, seed=5).fit(ds.X, ds.y)
        np.testing.assert_array_equal(a.predict_proba(ds.X), b.predict_proba(ds.X))


class TestLogisticRegression:
    def test_gradient_matches_finite_differences(self):
        # central-difference oracle on a 5-point toy problem
        rng = np.random.default_rng(4)
        X = rng.normal(size=(5, 3))
        y = np.array([0.0, 1.0, 1.0, 0.0, 1.0])
        w = rng.normal(size=3) * 0.5
        b, l2, eps = 0.3, 0.01, 1e-6

        grad_w, grad_b = logreg_grad(w, b, X, y, l2)
        for j in range(3):
            step = np.zeros(3)
            step[j] = eps
            fd = (logreg_loss(w + step, b, X, y, l2) - logreg_loss(w - step, b, X, y, l2)) / (2 * eps)
            assert abs(grad_w[j] - fd) / max(abs(fd), 1e-12) < 1e-5
        fd_b = (logreg_loss(w, b + eps, X, y, l2) - logreg_loss(w, b - eps, X, y, l2)) / (2 * eps)
        assert abs(grad_b - fd_b) / max(abs(fd_b), 1e-12) < 1e-5

    def test_deterministic_regardless_of_seed(self):
        ds = toy_dataset(30, 20)
        a = LogisticRegressionClassifier(seed=1).fit(ds.X, ds.y)
        b = LogisticRegressionClassifier(seed=2).fit(ds.X, ds.y)
        np.testing.assert_array_equal(a.predict_proba(ds.X), b.predict_proba(ds.X))


class TestPrediction:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_probabilities_in_unit_interval(self, kind):
        ds = toy_dataset(40, 20, gap=0.5)
        model = ModelSpec(kind, {"n_trees": 10} if kind == "random_forest" else {})(0)
        model.fit(ds.X, ds.y)
        proba = model.predict_proba(ds.X)
        assert (proba >= 0.0).all() and (proba <= 1.0).all()

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_threshold_consistency(self, kind):
        ds = toy_dataset(40, 20, gap=0.5)
        model = ModelSpec(kind, {"n_trees": 10} if kind == "random_forest" else {})(0)
        model.fit(ds.X, ds.y)
        np.testing.assert_array_equal(
            model.predict(ds.X), (model.predict_proba(ds.X) >= 0.5).astype(np.int8)
        )

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_dimension_mismatch_is_schema_error(self, kind):
        ds = toy_dataset(20, 10, d=3)
        model = ModelSpec(kind, {"n_trees": 3} if kind == "random_forest" else {})(0)
        model.fit(ds.X, ds.y)
        with pytest.raises(DataError, match="columns"):
            model.predict(np.ones((2, 5)))


class TestMetrics:
    def test_confusion_matrix_identities(self):
        cm = ConfusionMatrix(tp=30, tn=40, fp=10, fn=20)
        assert cm.accuracy == (30 + 40) / 100
        assert cm.precision == 30 / 40
        assert cm.recall == 30 / 50
        p, r = cm.precision, cm.recall
        assert cm.f1 == 2 * p * r / (p + r)

    def test_zero_guards(self):
        cm = ConfusionMatrix(tp=0, tn=10, fp=0, fn=5)
        assert cm.precision == 0.0 and cm.f1 == 0.0

    def test_reported_f1_identity(self):
        # published precision/recall pair reproduces the published f1
        f1 = 2 * 0.913 * 0.793 / (0.913 + 0.793)
        assert round(f1, 3) == 0.849

    def test_perfect_predictor(self):
        ds = toy_dataset(10, 10, gap=10.0)

        class Perfect:
            def fit(self, X, y):
                self.y = np.asarray(y)
                return self

            def predict(self, X):
                return (X[:, 0] > 5.0).astype(int)  # gap=10 puts minority high

        metrics = evaluate(lambda seed: Perfect(), ds, ds, n_runs=2, seed=0)
        assert metrics.accuracy == metrics.precision == metrics.recall == metrics.f1 == 1.0

    def test_all_positive_predictor_on_balanced_test(self):
        ds = toy_dataset(10, 10)

        class AlwaysPositive:
            def fit(self, X, y):
                return self

            def predict(self, X):
                return np.ones(len(X), dtype=int)

        metrics = evaluate(lambda seed: AlwaysPositive(), ds, ds, n_runs=3, seed=0)
        assert metrics.accuracy == 0.5
        assert metrics.recall == 1.0
        assert metrics.precision == 0.5
        assert metrics.f1 == pytest.approx(2 / 3)

    def test_metrics_recomputed_from_stored_matrices_match(self):
        ds = toy_dataset(40, 20, gap=1.0, seed=9)
        metrics = evaluate(ModelSpec("gbt", {"n_rounds": 20}), ds, ds, n_runs=3, seed=4)
        assert metrics.n_runs == 3 and len(metrics.per_run) == 3
        recomputed = Metrics.from_runs(metrics.per_run)
        assert recomputed == metrics

    def test_per_run_seeds_are_consecutive(self):
        ds = toy_dataset(20, 12, gap=2.0)
        seen = []

        class Spy:
            def __init__(self, seed):
                seen.append(seed)

            def fit(self, X, y):
                return self

            def predict(self, X):
                return np.zeros(len(X), dtype=int)

        evaluate(lambda seed: Spy(seed), ds, ds, n_runs=3, seed=7)
        assert seen == [7, 8, 9]


class TestSerialization:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_round_trip_is_bit_identical(self, kind, tmp_path):
        ds = toy_dataset(40, 20, gap=1.0, seed=3)
        params = {"n_trees": 8} if kind == "random_forest" else {}
        if kind == "gbt":
            params = {"n_rounds": 15}
        model = ModelSpec(kind, params)(2).fit(ds.X, ds.y)
        p = tmp_path / "model.json"
        save_model(model, p)
        loaded = load_model(p)
        np.testing.assert_array_equal(
            model.predict_proba(ds.X), loaded.predict_proba(ds.X)
        )

    def test_wrong_file_rejected(self, tmp_path):
        from metspredict.models import ModelIOError

        p = tmp_path / "bogus.json"
        p.write_text('{"format": "other"}', encoding="utf-8")
        with pytest.raises(ModelIOError, match="format"):
            load_model(p)
