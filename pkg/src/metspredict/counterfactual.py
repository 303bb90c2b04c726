"""Counterfactual explanations by nearest-unlike-neighbor feature copying.

For a query x, the search finds the closest training instance the model
assigns to the opposite class (standardized L1 distance, ties to the lowest
row index) and then greedily copies one feature value at a time from that
neighbor, each step taking the candidate with the best score: a penalty for
not yet flipping the predicted class plus the L1 distance to the original.
The loop stops as soon as the prediction flips, which is guaranteed after at
most d copies because the full copy is the unlike neighbor itself.

Summary statistics (distance/sparsity moments, per-feature change rates) and
a PCA decision-boundary grid exportable as plain CSVs round out the module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import Standardizer
from .ingest import Dataset
from .models import RandomForestClassifier


class CounterfactualError(ValueError):
    pass


class SearchError(CounterfactualError):
    pass


class SummaryError(CounterfactualError):
    pass


@dataclass(frozen=True)
class CfResult:
    original: np.ndarray
    counterfactual: np.ndarray
    changed: np.ndarray  # bool mask, True where the feature was modified
    l1_distance: float  # standardized feature space
    sparsity: int  # number of changed features
    original_class: int
    counterfactual_class: int
    valid: bool
    query_id: int = -1


@dataclass(frozen=True)
class CfSummary:
    avg_norm_distance: float
    std_norm_distance: float
    avg_sparsity: float
    std_sparsity: float
    pct_features_changed: float
    n_results: int


@dataclass(frozen=True)
class FeatureChangeRates:
    """Per-feature fraction of counterfactuals that modified the feature,
    sorted by rate descending (stable on ties)."""

    rates: dict[str, float]
    n_results: int


@dataclass(frozen=True)
class BoundaryGrid:
    mean: np.ndarray  # mean of the standardized features
    components: np.ndarray  # (2, d) orthonormal rows
    grid_u: np.ndarray
    grid_v: np.ndarray
    classes: np.ndarray  # (resolution, resolution) int8
    pairs: np.ndarray  # (m, 4): u0, v0, u1, v1 per counterfactual pair


def _predict_class(model, rows: np.ndarray) -> np.ndarray:
    return np.asarray(model.predict(rows)).astype(np.int8)


def _original_class_margin(model, rows: np.ndarray, x_class: int) -> np.ndarray:
    """Log-odds margin toward x's class; negative once the prediction flips.

    Probabilities saturate near 0/1 for confidently classified rows, hiding
    progress, so the score is taken in log-odds space. Models without
    predict_proba degrade to hard 0/1 margins.
    """
    if hasattr(model, "predict_proba"):
        p1 = np.asarray(model.predict_proba(rows), dtype=np.float64)
        p = p1 if x_class == 1 else 1.0 - p1
        p = np.clip(p, 1e-12, 1.0 - 1e-12)
        return np.log(p / (1.0 - p))
    return np.where(_predict_class(model, rows) == x_class, 1.0, -1.0)


def nearest_unlike_index(
    x: np.ndarray,
    train: Dataset,
    std: Standardizer,
    train_classes: np.ndarray,
    x_class: int,
) -> int:
    unlike = np.flatnonzero(train_classes != x_class)
    if unlike.size == 0:
        raise SearchError("no training instance is predicted as the opposite class")
    diffs = np.abs((train.X[unlike] - x) / std.scale).sum(axis=1)
    return int(unlike[np.argmin(diffs)])  # argmin: first (lowest) index on ties


def nearest_unlike_neighbor(x: np.ndarray, train: Dataset, model) -> np.ndarray:
    """The training row with minimal standardized L1 distance among those the
    model predicts as the opposite class of x."""
    std = Standardizer.fit(train.X)
    train_classes = _predict_class(model, train.X)
    x_class = int(_predict_class(model, x[None, :])[0])
    idx = nearest_unlike_index(x, train, std, train_classes, x_class)
    return train.X[idx].copy()


def nice_counterfactual(
    x: np.ndarray,
    model,
    train: Dataset,
    lam: float = 8.0,
    query_id: int = -1,
    _std: Standardizer | None = None,
    _train_classes: np.ndarray | None = None,
) -> CfResult:
    """Greedy feature-copy search toward the nearest unlike neighbor.

    Candidate score = lam * max(margin toward x's class, 0) + standardized
    L1 to x; ties go to the lowest feature index. The continuous class-change
    term makes every copy count toward flipping -- scoring the flip as a bare
    indicator lets irrelevant-but-nearby features (race, sex) soak up copies
    without progress. Flipped candidates score on distance alone, so among
    flips the nearest one wins. At least one feature is always copied: a
    counterfactual must differ from its source.
    """
    std = _std or Standardizer.fit(train.X)
    train_classes = (
        _train_classes if _train_classes is not None else _predict_class(model, train.X)
    )
    x = np.asarray(x, dtype=np.float64)
    x_class = int(_predict_class(model, x[None, :])[0])
    nun = train.X[nearest_unlike_index(x, train, std, train_classes, x_class)]

    current = x.copy()
    remaining = [j for j in range(len(x)) if x[j] != nun[j]]
    flipped = False
    for _ in range(len(remaining)):
        candidates = np.tile(current, (len(remaining), 1))
        for row, j in enumerate(remaining):
            candidates[row, j] = nun[j]
        flips = _predict_class(model, candidates) != x_class
        l1 = np.abs((candidates - x) / std.scale).sum(axis=1)
        margins = _original_class_margin(model, candidates, x_class)
        scores = lam * np.maximum(margins, 0.0) + l1
        pick = int(np.argmin(scores))  # first minimum = lowest feature index
        current = candidates[pick]
        remaining.pop(pick)
        if flips[pick]:
            flipped = True
            break
    if not flipped:
        # copying every differing feature yields the unlike neighbor, which
        # by construction flips; reaching this line means the model broke
        # the contract of predicting deterministically
        raise SearchError("greedy search exhausted all features without a class flip")

    changed = current != x
    cf_class = int(_predict_class(model, current[None, :])[0])
    return CfResult(
        original=x,
        counterfactual=current,
        changed=changed,
        l1_distance=float(np.abs((current - x) / std.scale).sum()),
        sparsity=int(changed.sum()),
        original_class=x_class,
        counterfactual_class=cf_class,
        valid=cf_class != x_class,
        query_id=query_id,
    )


POPULATIONS = ("all", "positives", "correct")


def generate_counterfactuals(
    model,
    train: Dataset,
    queries: Dataset,
    lam: float = 8.0,
    population: str = "all",
) -> list[CfResult]:
    """Counterfactuals for the selected query rows.

    population: "all" explains every query row; "positives" restricts to
    rows the model predicts as class 1 (the high-risk-to-low-risk
    direction); "correct" restricts to rows the model classifies correctly.
    """
    if population not in POPULATIONS:
        raise CounterfactualError(
            f"unknown population {population!r}; expected one of {POPULATIONS}"
        )
    std = Standardizer.fit(train.X)
    train_classes = _predict_class(model, train.X)
    query_classes = _predict_class(model, queries.X)
    results = []
    for i in range(len(queries)):
        if population == "correct" and query_classes[i] != queries.y[i]:
            continue
        if population == "positives" and query_classes[i] != 1:
            continue
        results.append(
            nice_counterfactual(
                queries.X[i],
                model,
                train,
                lam=lam,
                query_id=int(queries.ids[i]),
                _std=std,
                _train_classes=train_classes,
            )
        )
    return results


def summarize(results: list[CfResult], d: int) -> CfSummary:
    """Distance and sparsity moments (population std); pct = avg_sparsity/d."""
    if not results:
        raise SummaryError("no counterfactual results to summarize")
    if not all(r.valid for r in results):
        raise SummaryError("summary requires all results to be valid")
    l1 = np.array([r.l1_distance for r in results])
    l0 = np.array([r.sparsity for r in results], dtype=np.float64)
    avg_sparsity = float(l0.mean())
    return CfSummary(
        avg_norm_distance=float(l1.mean()),
        std_norm_distance=float(l1.std()),
        avg_sparsity=avg_sparsity,
        std_sparsity=float(l0.std()),
        pct_features_changed=avg_sparsity / d,
        n_results=len(results),
    )


def feature_change_rates(results: list[CfResult], feature_names: tuple[str, ...]) -> FeatureChangeRates:
    if not results:
        raise SummaryError("no counterfactual results to summarize")
    masks = np.stack([r.changed for r in results])
    rates = masks.mean(axis=0)
    order = np.argsort(-rates, kind="stable")
    return FeatureChangeRates(
        rates={feature_names[j]: float(rates[j]) for j in order},
        n_results=len(results),
    )


# -- PCA decision boundary -----------------------------------------------------


def _top2_components(X_std: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and top-2 eigenvectors of the covariance, deterministically signed."""
    mean = X_std.mean(axis=0)
    cov = np.cov(X_std - mean, rowvar=False)
    vals, vecs = np.linalg.eigh(np.atleast_2d(cov))
    order = np.argsort(vals)[::-1][:2]
    comps = vecs[:, order].T  # (2, d)
    for i in range(comps.shape[0]):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return mean, comps


def boundary_grid(
    train: Dataset,
    cf_pairs: list[CfResult],
    resolution: int = 200,
    seed: int = 0,
    n_trees: int = 200,
) -> BoundaryGrid:
    """Class predictions of a forest over the 2-d principal plane.

    Features are standardized, projected onto the top-2 principal
    components, and a random forest fitted to the projections is evaluated
    on a resolution x resolution grid spanning the data with a 10% margin.
    Counterfactual pairs are projected into the same plane.
    """
    if train.X.shape[1] < 2:
        raise CounterfactualError("need at least 2 features for a 2-d projection")
    if len(train) < 3:
        raise CounterfactualError("need at least 3 training rows")

    X = train.X
    scale = X.std(axis=0)
    keep = np.flatnonzero(scale > 0.0)
    if keep.size < X.shape[1]:
        import warnings

        dropped = [train.schema.names[j] for j in range(X.shape[1]) if j not in keep]
        warnings.warn(f"dropping zero-variance feature(s) for projection: {dropped}")
    if keep.size < 2:
        raise CounterfactualError("fewer than 2 features with nonzero variance")

    std = Standardizer.fit(X[:, keep])
    X_std = std.transform(X[:, keep])
    mean, comps = _top2_components(X_std)
    proj = (X_std - mean) @ comps.T

    forest = RandomForestClassifier(n_trees=n_trees, seed=seed).fit(proj, train.y)

    lo, hi = proj.min(axis=0), proj.max(axis=0)
    margin = 0.1 * (hi - lo)
    grid_u = np.linspace(lo[0] - margin[0], hi[0] + margin[0], resolution)
    grid_v = np.linspace(lo[1] - margin[1], hi[1] + margin[1], resolution)
    uu, vv = np.meshgrid(grid_u, grid_v)
    cells = np.column_stack([uu.ravel(), vv.ravel()])
    classes = forest.predict(cells).reshape(resolution, resolution)

    pairs = np.zeros((len(cf_pairs), 4))
    for i, r in enumerate(cf_pairs):
        a = (std.transform(r.original[keep][None, :]) - mean) @ comps.T
        b = (std.transform(r.counterfactual[keep][None, :]) - mean) @ comps.T
        pairs[i] = [a[0, 0], a[0, 1], b[0, 0], b[0, 1]]

    return BoundaryGrid(
        mean=mean,
        components=comps,
        grid_u=grid_u,
        grid_v=grid_v,
        classes=classes.astype(np.int8),
        pairs=pairs,
    )


# -- exports -------------------------------------------------------------------


def write_cf_csv(
    results: list[CfResult],
    feature_names: tuple[str, ...],
    path: str | Path,
    header_comment: str | None = None,
) -> None:
    """One row per counterfactual: originals, counterfactuals, change flags."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["id"]
            + [f"orig_{n}" for n in feature_names]
            + [f"cf_{n}" for n in feature_names]
            + [f"changed_{n}" for n in feature_names]
            + ["l1", "l0", "valid"]
        )
        for r in results:
            writer.writerow(
                [r.query_id]
                + [repr(float(v)) for v in r.original]
                + [repr(float(v)) for v in r.counterfactual]
                + [int(c) for c in r.changed]
                + [repr(r.l1_distance), r.sparsity, int(r.valid)]
            )


def write_boundary_csv(
    grid: BoundaryGrid, cells_path: str | Path, pairs_path: str | Path,
    header_comment: str | None = None,
) -> None:
    with Path(cells_path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "class"])
        for i, v in enumerate(grid.grid_v):
            for j, u in enumerate(grid.grid_u):
                writer.writerow([repr(float(u)), repr(float(v)), int(grid.classes[i, j])])
    with Path(pairs_path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["u0", "v0", "u1", "v1"])
        for row in grid.pairs:
            writer.writerow([repr(float(v)) for v in row])
