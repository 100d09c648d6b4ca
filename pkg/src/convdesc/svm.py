"""Linear soft-margin SVM: binary dual coordinate descent and
one-vs-rest multi-class on top of per-dimension standardization.

The binary solver minimizes

    0.5 * ||w~||^2 + C * sum_i max(0, 1 - y_i * w~ . x~_i)

where x~ is the input augmented with a constant 1 so the bias lives in
the weight vector (and is therefore regularized). The dual is a
box-constrained QP solved by coordinate descent with seeded epoch-wise
index shuffling, which keeps every dual variable in [0, C] by
construction and is deterministic for a fixed (X, y, C, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import formats
from .errors import InvalidArgumentError

DEFAULT_C = 1.0
DEFAULT_EPOCHS = 1000
PG_TOLERANCE = 1e-4


@dataclass(frozen=True)
class Scaler:
    """Per-dimension standardization parameters (population convention)."""

    means: np.ndarray
    stds: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.means) / self.stds


@dataclass(frozen=True)
class SvmModel:
    """One weight vector and bias per class, plus the shared scaler."""

    class_labels: tuple[str, ...]
    weights: np.ndarray  # (n_classes, dim) float64
    biases: np.ndarray  # (n_classes,) float64
    scaler: Scaler
    C: float

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class DualSolution:
    """Internals of one binary solve, kept for diagnostics and tests."""

    w_aug: np.ndarray
    alpha: np.ndarray
    epochs_run: int
    converged: bool


def fit_scaler(x) -> Scaler:
    """Per-dimension mean/stddev; zero-variance dimensions get stddev 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidArgumentError("feature matrix must be 2-D with at least one row")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds[stds == 0.0] = 1.0
    return Scaler(means=means, stds=stds)


def dual_coordinate_descent(x_aug: np.ndarray, y: np.ndarray, C: float,
                            epochs: int, seed: int,
                            tol: float = PG_TOLERANCE,
                            epoch_callback=None) -> DualSolution:
    """Coordinate descent on the dual of the hinge-loss SVM.

    x_aug already carries the constant bias feature. Runs the given
    number of epochs or stops when the largest projected-gradient
    violation of an epoch falls below tol.
    """
    n, d = x_aug.shape
    sq_norms = (x_aug * x_aug).sum(axis=1)
    alpha = np.zeros(n)
    w = np.zeros(d)
    rng = np.random.Generator(np.random.PCG64(seed))
    epochs_run = 0
    converged = False
    for _ in range(epochs):
        epochs_run += 1
        max_violation = 0.0
        for i in rng.permutation(n):
            g = y[i] * (w @ x_aug[i]) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                max_violation = max(max_violation, abs(pg))
                new_a = min(max(a - g / sq_norms[i], 0.0), C)
                if new_a != a:
                    w += (new_a - a) * y[i] * x_aug[i]
                    alpha[i] = new_a
        if epoch_callback is not None:
            epoch_callback(w, alpha)
        if max_violation < tol:
            converged = True
            break
    return DualSolution(w_aug=w, alpha=alpha, epochs_run=epochs_run,
                        converged=converged)


def train_binary(x, y, C: float = DEFAULT_C, epochs: int = DEFAULT_EPOCHS,
                 seed: int = 0) -> tuple[np.ndarray, float]:
    """Train one hinge-loss SVM on +-1 labels; returns (weights, bias)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if C <= 0.0:
        raise InvalidArgumentError(f"C must be positive, got {C}")
    if x.ndim != 2 or len(x) != len(y):
        raise InvalidArgumentError("X must be 2-D with one label per row")
    if not (set(np.unique(y)) <= {-1.0, 1.0}):
        raise InvalidArgumentError("labels must be +-1")
    if len(np.unique(y)) < 2:
        raise InvalidArgumentError("need at least one example of each label")
    x_aug = np.hstack([x, np.ones((len(x), 1))])
    solution = dual_coordinate_descent(x_aug, y, C, epochs, seed)
    return solution.w_aug[:-1], float(solution.w_aug[-1])


def primal_objective(w: np.ndarray, b: float, x, y, C: float) -> float:
    """0.5*(||w||^2 + b^2) + C * hinge, the quantity the solver minimizes."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    margins = y * (x @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins).sum()
    return 0.5 * (w @ w + b * b) + C * hinge


def dual_objective(alpha: np.ndarray, w_aug: np.ndarray) -> float:
    return float(alpha.sum() - 0.5 * (w_aug @ w_aug))


def train_multiclass(x, labels, C: float = DEFAULT_C, seed: int = 0,
                     epochs: int = DEFAULT_EPOCHS) -> SvmModel:
    """One-vs-rest training over sorted class labels with a shared scaler."""
    x = np.asarray(x, dtype=np.float64)
    labels = [str(l) for l in labels]
    if x.ndim != 2 or len(x) != len(labels):
        raise InvalidArgumentError("X must be 2-D with one label per row")
    class_labels = sorted(set(labels))
    if len(class_labels) < 2:
        raise InvalidArgumentError(
            f"need at least 2 classes, got {len(class_labels)}"
        )
    scaler = fit_scaler(x)
    x_std = scaler.transform(x)
    label_arr = np.asarray(labels)
    weights = np.empty((len(class_labels), x.shape[1]))
    biases = np.empty(len(class_labels))
    # every subproblem shares the seed, so flipping all labels flips the
    # solution exactly and a 2-class model reduces to the binary one
    for idx, cls in enumerate(class_labels):
        y = np.where(label_arr == cls, 1.0, -1.0)
        weights[idx], biases[idx] = train_binary(x_std, y, C=C, epochs=epochs,
                                                 seed=seed)
    return SvmModel(class_labels=tuple(class_labels), weights=weights,
                    biases=biases, scaler=scaler, C=C)


def decision_values(model: SvmModel, x) -> np.ndarray:
    """Per-class decision values w.v + b for standardized input rows."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise InvalidArgumentError(
            f"feature dim {x.shape[1]} != model dim {model.dim}"
        )
    return model.scaler.transform(x) @ model.weights.T + model.biases


def predict(model: SvmModel, v) -> str:
    """Class of maximal decision value; ties go to the smallest label.

    Labels are stored sorted, so the first argmax is the lexicographically
    smallest among tied classes.
    """
    scores = decision_values(model, v)[0]
    return model.class_labels[int(np.argmax(scores))]


def predict_many(model: SvmModel, x) -> list[str]:
    scores = decision_values(model, x)
    return [model.class_labels[i] for i in np.argmax(scores, axis=1)]


def save_model(path, model: SvmModel) -> int:
    return formats.write_svm_model(path, model.class_labels,
                                   model.scaler.means, model.scaler.stds,
                                   model.weights, model.biases)


def load_model(path, C: float = DEFAULT_C) -> SvmModel:
    labels, means, stds, weights, biases = formats.read_svm_model(path)
    scaler = Scaler(means=means.astype(np.float64), stds=stds.astype(np.float64))
    return SvmModel(class_labels=tuple(labels),
                    weights=weights.astype(np.float64),
                    biases=biases.astype(np.float64), scaler=scaler, C=C)
