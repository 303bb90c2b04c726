"""Classifiers and evaluation: trees, forests, boosting, logistic regression."""

from __future__ import annotations

from dataclasses import dataclass, field

from .boosting import GradientBoostedTreesClassifier
from .io import ModelIOError, load_model, save_model
from .linear import LogisticRegressionClassifier
from .metrics import ConfusionMatrix, Metrics, evaluate
from .trees import DataError, DecisionTreeClassifier, FitError, RandomForestClassifier

MODEL_KINDS = {
    "decision_tree": DecisionTreeClassifier,
    "random_forest": RandomForestClassifier,
    "gbt": GradientBoostedTreesClassifier,
    "logreg": LogisticRegressionClassifier,
}


@dataclass(frozen=True)
class ModelSpec:
    """Picklable model factory: kind plus constructor overrides.

    Calling the spec with a seed builds an unfitted classifier, which is the
    factory shape ``evaluate`` and the weight sweeps expect.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise FitError(
                f"unknown model kind {self.kind!r}; expected one of {sorted(MODEL_KINDS)}"
            )

    def __call__(self, seed: int):
        return MODEL_KINDS[self.kind](seed=seed, **self.params)


__all__ = [
    "ConfusionMatrix",
    "DataError",
    "DecisionTreeClassifier",
    "FitError",
    "GradientBoostedTreesClassifier",
    "LogisticRegressionClassifier",
    "Metrics",
    "ModelIOError",
    "ModelSpec",
    "MODEL_KINDS",
    "RandomForestClassifier",
    "evaluate",
    "load_model",
    "save_model",
]
