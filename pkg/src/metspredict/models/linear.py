"""L2-regularized logistic regression trained by full-batch gradient descent.

Features are standardized internally with training-set mean/std; the bias
term is excluded from the penalty.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .._util import Standardizer
from .trees import check_predict_input, check_training_data


def logreg_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    z = X @ w + b
    data = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(data + 0.5 * l2 * np.dot(w, w))


def logreg_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    residual = expit(X @ w + b) - y
    grad_w = X.T @ residual / len(y) + l2 * w
    grad_b = float(residual.mean())
    return grad_w, grad_b


class LogisticRegressionClassifier:
    def __init__(self, l2: float = 1e-4, epochs: int = 500, lr: float = 0.5, seed: int = 0):
        self.l2 = l2
        self.epochs = epochs
        self.lr = lr
        self.seed = seed  # kept for interface parity; descent is deterministic
        self.w_: np.ndarray | None = None
        self.b_: float = 0.0
        self.standardizer_: Standardizer | None = None
        self.n_features_: int | None = None

    def fit(self, X, y) -> "LogisticRegressionClassifier":
        X, y = check_training_data(X, y)
        self.n_features_ = X.shape[1]
        self.standardizer_ = Standardizer.fit(X)
        Xs = self.standardizer_.transform(X)
        w = np.zeros(X.shape[1])
        b = 0.0
        for _ in range(self.epochs):
            grad_w, grad_b = logreg_grad(w, b, Xs, y, self.l2)
            w -= self.lr * grad_w
            b -= self.lr * grad_b
        self.w_, self.b_ = w, b
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features_)
        Xs = self.standardizer_.transform(X)
        return expit(Xs @ self.w_ + self.b_)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)
