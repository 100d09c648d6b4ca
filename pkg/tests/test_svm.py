import numpy as np
import pytest

from convdesc.errors import InvalidArgumentError
from convdesc.svm import (SvmModel, decision_values, dual_coordinate_descent,
                          dual_objective, fit_scaler, load_model,
                          predict, predict_many, primal_objective, save_model,
                          train_binary, train_multiclass)

from .oracles import svm_dual_reference, svm_primal_reference


def separable_clouds(rng, n_per=20, gap=4.0):
    a = rng.normal(size=(n_per, 2)) + [gap, gap]
    b = rng.normal(size=(n_per, 2)) - [gap, gap]
    x = np.vstack([a, b])
    y = np.concatenate([np.ones(n_per), -np.ones(n_per)])
    return x, y


class TestFitScaler:
    def test_single_row(self):
        scaler = fit_scaler(np.array([[3.0, -1.0, 0.0]]))
        np.testing.assert_array_equal(scaler.means, [3.0, -1.0, 0.0])
        np.testing.assert_array_equal(scaler.stds, [1.0, 1.0, 1.0])

    def test_population_convention(self):
        scaler = fit_scaler(np.array([[0.0], [2.0]]))
        assert scaler.means[0] == 1.0
        assert scaler.stds[0] == 1.0

    def test_matches_direct_recomputation(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 7))
        scaler = fit_scaler(x)
        np.testing.assert_allclose(scaler.means, x.mean(axis=0), atol=1e-6)
        np.testing.assert_allclose(scaler.stds, np.sqrt(((x - x.mean(0)) ** 2).mean(0)),
                                   atol=1e-6)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fit_scaler(np.empty((0, 3)))


class TestTrainBinary:
    def test_symmetric_two_point_problem(self):
        x = np.array([[-1.0], [1.0]])
        y = np.array([-1.0, 1.0])
        w, b = train_binary(x, y, C=100.0)
        # boundary at 0, both points classified correctly
        assert abs(b) < 1e-6
        assert w[0] > 0
        assert np.sign(x @ w + b).tolist() == [-1.0, 1.0]

    def test_separable_clouds_perfect_training_accuracy(self):
        rng = np.random.default_rng(1)
        x, y = separable_clouds(rng)
        w, b = train_binary(x, y, C=10.0)
        assert (np.sign(x @ w + b) == y).all()

    def test_objective_matches_qp_reference(self):
        rng = np.random.default_rng(2)
        for trial in range(8):
            n = int(rng.integers(3, 7))
            x = rng.normal(size=(n, 2))
            y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
            if len(np.unique(y)) < 2:
                y[0] = -y[0]
            C = float(rng.choice([0.5, 1.0, 5.0]))
            w, b = train_binary(x, y, C=C, epochs=4000)
            ours = primal_objective(w, b, x, y, C)
            reference = svm_dual_reference(x, y, C)
            assert ours == pytest.approx(reference, abs=1e-3)
            assert ours == pytest.approx(
                svm_primal_reference(w, b, x, y, C), abs=1e-9)

    def test_dual_variables_in_box(self):
        rng = np.random.default_rng(3)
        x, y = separable_clouds(rng, n_per=12, gap=1.0)
        C = 2.0
        x_aug = np.hstack([x, np.ones((len(x), 1))])
        seen = []
        solution = dual_coordinate_descent(
            x_aug, y, C, epochs=50, seed=0,
            epoch_callback=lambda w, a: seen.append(a.copy()))
        for alpha in seen + [solution.alpha]:
            assert (alpha >= 0.0).all()
            assert (alpha <= C).all()

    def test_weak_duality_at_every_epoch(self):
        rng = np.random.default_rng(4)
        x, y = separable_clouds(rng, n_per=10, gap=0.5)
        C = 1.0
        x_aug = np.hstack([x, np.ones((len(x), 1))])

        def check(w, alpha):
            primal = primal_objective(w[:-1], w[-1], x, y, C)
            dual = dual_objective(alpha, w)
            assert primal >= dual - 1e-6

        dual_coordinate_descent(x_aug, y, C, epochs=30, seed=1,
                                epoch_callback=check)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(5)
        x, y = separable_clouds(rng, n_per=15, gap=0.8)
        w1, b1 = train_binary(x, y, C=1.0, seed=9)
        w2, b2 = train_binary(x, y, C=1.0, seed=9)
        assert w1.tobytes() == w2.tobytes() and b1 == b2

    def test_single_class_rejected(self):
        with pytest.raises(InvalidArgumentError):
            train_binary(np.ones((3, 2)), np.ones(3))

    def test_nonpositive_c_rejected(self):
        x = np.array([[-1.0], [1.0]])
        y = np.array([-1.0, 1.0])
        with pytest.raises(InvalidArgumentError):
            train_binary(x, y, C=0.0)
        with pytest.raises(InvalidArgumentError):
            train_binary(x, y, C=-1.0)


class TestTrainMulticlass:
    def test_two_class_reduces_to_binary(self):
        rng = np.random.default_rng(6)
        x, y = separable_clouds(rng, n_per=15, gap=1.5)
        labels = np.where(y > 0, "pos", "neg")
        model = train_multiclass(x, labels, C=1.0, seed=2)
        scaler = model.scaler
        w, b = train_binary(scaler.transform(x), np.where(y > 0, 1.0, -1.0),
                            C=1.0, seed=2)
        predictions = predict_many(model, x)
        binary_predictions = np.where(scaler.transform(x) @ w + b > 0,
                                      "pos", "neg")
        # sign tie (decision exactly 0) would fall to the smaller label in
        # both schemes
        assert predictions == binary_predictions.tolist()

    def test_three_clouds_high_training_accuracy(self):
        rng = np.random.default_rng(7)
        centers = [(0.0, 8.0), (8.0, -8.0), (-8.0, -8.0)]
        x = np.vstack([rng.normal(size=(30, 2)) + c for c in centers])
        labels = ["a"] * 30 + ["b"] * 30 + ["c"] * 30
        model = train_multiclass(x, labels, C=10.0, seed=3)
        predictions = predict_many(model, x)
        accuracy = np.mean([p == t for p, t in zip(predictions, labels)])
        assert accuracy >= 0.99

    def test_row_permutation_leaves_predictions_unchanged(self):
        rng = np.random.default_rng(8)
        centers = [(0.0, 6.0), (6.0, -6.0), (-6.0, -6.0)]
        x = np.vstack([rng.normal(size=(20, 2)) + c for c in centers])
        labels = np.array(["a"] * 20 + ["b"] * 20 + ["c"] * 20)
        grid = rng.normal(size=(50, 2)) * 6
        model_a = train_multiclass(x, labels, C=1.0, seed=4)
        perm = rng.permutation(len(x))
        model_b = train_multiclass(x[perm], labels[perm], C=1.0, seed=4)
        assert model_a.class_labels == model_b.class_labels
        assert predict_many(model_a, grid) == predict_many(model_b, grid)

    def test_fewer_than_two_classes_rejected(self):
        with pytest.raises(InvalidArgumentError):
            train_multiclass(np.ones((3, 2)), ["a", "a", "a"])


class TestPredict:
    def test_tie_breaks_to_smallest_label(self):
        from convdesc.svm import Scaler
        model = SvmModel(
            class_labels=("b", "a", "c")[0:3],  # stored order is the given order
            weights=np.zeros((3, 2)),
            biases=np.zeros(3),
            scaler=Scaler(means=np.zeros(2), stds=np.ones(2)),
            C=1.0,
        )
        # all decision values equal; first stored label wins, and
        # train_multiclass always stores labels sorted
        assert predict(model, np.zeros(2)) == "b"
        sorted_model = SvmModel(
            class_labels=("a", "b", "c"),
            weights=np.zeros((3, 2)),
            biases=np.zeros(3),
            scaler=Scaler(means=np.zeros(2), stds=np.ones(2)),
            C=1.0,
        )
        assert predict(sorted_model, np.zeros(2)) == "a"

    def test_training_points_recovered(self):
        rng = np.random.default_rng(9)
        x, y = separable_clouds(rng, n_per=10, gap=3.0)
        labels = np.where(y > 0, "pos", "neg")
        model = train_multiclass(x, labels, C=10.0, seed=5)
        assert predict_many(model, x) == labels.tolist()

    def test_dim_mismatch_rejected(self):
        rng = np.random.default_rng(10)
        x, y = separable_clouds(rng, n_per=5, gap=3.0)
        model = train_multiclass(x, np.where(y > 0, "p", "n"), C=1.0)
        with pytest.raises(InvalidArgumentError):
            predict(model, np.zeros(3))

    def test_uniform_bias_shift_invariance(self):
        rng = np.random.default_rng(11)
        centers = [(0.0, 5.0), (5.0, -5.0), (-5.0, -5.0)]
        x = np.vstack([rng.normal(size=(10, 2)) + c for c in centers])
        labels = ["a"] * 10 + ["b"] * 10 + ["c"] * 10
        model = train_multiclass(x, labels, C=1.0, seed=6)
        shifted = SvmModel(class_labels=model.class_labels,
                           weights=model.weights,
                           biases=model.biases + 13.5,
                           scaler=model.scaler, C=model.C)
        probe = rng.normal(size=(40, 2)) * 5
        assert predict_many(model, probe) == predict_many(shifted, probe)

    def test_feature_rescaling_with_refit_scaler_invariant(self):
        rng = np.random.default_rng(12)
        centers = [(0.0, 5.0), (5.0, -5.0)]
        x = np.vstack([rng.normal(size=(12, 2)) + c for c in centers])
        labels = ["a"] * 12 + ["b"] * 12
        probe = rng.normal(size=(30, 2)) * 5
        base = train_multiclass(x, labels, C=1.0, seed=7)
        scaled = train_multiclass(x * 25.0, labels, C=1.0, seed=7)
        assert predict_many(base, probe) == predict_many(scaled, probe * 25.0)


class TestModelSerialization:
    def test_round_trip_preserves_predictions(self, tmp_path):
        rng = np.random.default_rng(13)
        x, y = separable_clouds(rng, n_per=10, gap=2.0)
        labels = np.where(y > 0, "pos", "neg")
        model = train_multiclass(x, labels, C=1.0, seed=8)
        path = tmp_path / "model.cdsv"
        save_model(path, model)
        loaded = load_model(path)
        assert loaded.class_labels == model.class_labels
        probe = rng.normal(size=(25, 2)) * 3
        base_scores = decision_values(model, probe)
        loaded_scores = decision_values(loaded, probe)
        np.testing.assert_allclose(loaded_scores, base_scores, atol=1e-4)
        assert predict_many(loaded, probe) == predict_many(model, probe)
