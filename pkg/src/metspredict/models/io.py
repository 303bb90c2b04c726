"""Model serialization: version-tagged JSON, bit-exact prediction round trip.

Floats survive JSON unchanged (shortest round-trip repr), so a saved and
reloaded model predicts identically to the original.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .._util import Standardizer
from .boosting import GradientBoostedTreesClassifier
from .linear import LogisticRegressionClassifier
from .trees import DecisionTreeClassifier, FlatTree, RandomForestClassifier

FORMAT = "metspredict-model"
VERSION = 1


class ModelIOError(ValueError):
    pass


def _tree_state(tree: FlatTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from_state(s: dict) -> FlatTree:
    return FlatTree(
        feature=np.asarray(s["feature"], dtype=np.int32),
        threshold=np.asarray(s["threshold"], dtype=np.float64),
        left=np.asarray(s["left"], dtype=np.int32),
        right=np.asarray(s["right"], dtype=np.int32),
        value=np.asarray(s["value"], dtype=np.float64),
    )


def save_model(model, path: str | Path) -> None:
    if isinstance(model, DecisionTreeClassifier):
        kind = "decision_tree"
        params = {
            "max_depth": model.max_depth,
            "min_samples_split": model.min_samples_split,
            "seed": model.seed,
        }
        state = {"tree": _tree_state(model.tree_), "n_features": model.n_features_}
    elif isinstance(model, RandomForestClassifier):
        kind = "random_forest"
        params = {
            "n_trees": model.n_trees,
            "max_depth": model.max_depth,
            "min_samples_split": model.min_samples_split,
            "max_features": model.max_features,
            "bootstrap": model.bootstrap,
            "seed": model.seed,
        }
        state = {
            "trees": [_tree_state(t) for t in model.trees_],
            "n_features": model.n_features_,
        }
    elif isinstance(model, GradientBoostedTreesClassifier):
        kind = "gbt"
        params = {
            "n_rounds": model.n_rounds,
            "learning_rate": model.learning_rate,
            "max_depth": model.max_depth,
            "reg_lambda": model.reg_lambda,
            "gamma": model.gamma,
            "seed": model.seed,
        }
        state = {
            "base_score": model.base_score_,
            "feat": model.feat_.tolist(),
            "thr": model.thr_.tolist(),
            "val": model.val_.tolist(),
            "n_features": model.n_features_,
        }
    elif isinstance(model, LogisticRegressionClassifier):
        kind = "logreg"
        params = {"l2": model.l2, "epochs": model.epochs, "lr": model.lr, "seed": model.seed}
        state = {
            "w": model.w_.tolist(),
            "b": model.b_,
            "center": model.standardizer_.center.tolist(),
            "scale": model.standardizer_.scale.tolist(),
            "n_features": model.n_features_,
        }
    else:
        raise ModelIOError(f"cannot serialize model of type {type(model).__name__}")

    payload = {"format": FORMAT, "version": VERSION, "kind": kind, "params": params, "state": state}
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"{path}: not a valid model file ({exc})") from None
    if payload.get("format") != FORMAT:
        raise ModelIOError(f"{path}: unrecognized format tag {payload.get('format')!r}")
    if payload.get("version") != VERSION:
        raise ModelIOError(f"{path}: unsupported version {payload.get('version')!r}")

    kind, params, state = payload["kind"], payload["params"], payload["state"]
    if kind == "decision_tree":
        model = DecisionTreeClassifier(**params)
        model.tree_ = _tree_from_state(state["tree"])
        model.n_features_ = state["n_features"]
    elif kind == "random_forest":
        model = RandomForestClassifier(**params)
        model.trees_ = [_tree_from_state(s) for s in state["trees"]]
        model.n_features_ = state["n_features"]
    elif kind == "gbt":
        model = GradientBoostedTreesClassifier(**params)
        model.base_score_ = state["base_score"]
        model.feat_ = np.asarray(state["feat"], dtype=np.int32)
        model.thr_ = np.asarray(state["thr"], dtype=np.float64)
        model.val_ = np.asarray(state["val"], dtype=np.float64)
        model.n_features_ = state["n_features"]
    elif kind == "logreg":
        model = LogisticRegressionClassifier(**params)
        model.w_ = np.asarray(state["w"], dtype=np.float64)
        model.b_ = state["b"]
        model.standardizer_ = Standardizer(
            center=np.asarray(state["center"], dtype=np.float64),
            scale=np.asarray(state["scale"], dtype=np.float64),
        )
        model.n_features_ = state["n_features"]
    else:
        raise ModelIOError(f"{path}: unknown model kind {kind!r}")
    return model
