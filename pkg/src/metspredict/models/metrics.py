"""Confusion-matrix metrics and the repeated-training evaluation protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ingest import Dataset


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        y_true = np.asarray(y_true).astype(int)
        y_pred = np.asarray(y_pred).astype(int)
        return cls(
            tp=int(((y_true == 1) & (y_pred == 1)).sum()),
            tn=int(((y_true == 0) & (y_pred == 0)).sum()),
            fp=int(((y_true == 0) & (y_pred == 1)).sum()),
            fn=int(((y_true == 1) & (y_pred == 0)).sum()),
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if (p + r) > 0.0 else 0.0


@dataclass(frozen=True)
class Metrics:
    """Metric means over the repeated runs, plus each run's raw counts."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    n_runs: int
    per_run: tuple[ConfusionMatrix, ...]

    @classmethod
    def from_runs(cls, runs: tuple[ConfusionMatrix, ...]) -> "Metrics":
        return cls(
            accuracy=float(np.mean([c.accuracy for c in runs])),
            precision=float(np.mean([c.precision for c in runs])),
            recall=float(np.mean([c.recall for c in runs])),
            f1=float(np.mean([c.f1 for c in runs])),
            n_runs=len(runs),
            per_run=runs,
        )


def evaluate(factory, train: Dataset, test: Dataset, n_runs: int = 3, seed: int = 0) -> Metrics:
    """Train ``n_runs`` models with seeds seed, seed+1, ... on the same
    training set, score each on the test set, and average the four metrics.

    ``factory(seed)`` must return an unfitted model exposing fit/predict.
    The positive class is label 1.
    """
    runs = []
    for i in range(n_runs):
        model = factory(seed + i).fit(train.X, train.y)
        pred = model.predict(test.X)
        runs.append(ConfusionMatrix.from_predictions(test.y, pred))
    return Metrics.from_runs(tuple(runs))
