"""Class-imbalance handling: oversamplers, the hybrid combiner, weight sweeps.

Four minority-sample sources are provided: plain duplication (ROS),
interpolation between minority neighbors (SMOTE), density-adaptive
interpolation (ADASYN), and a pluggable generative source (a Gaussian-copula
sampler or an externally supplied CSV). The hybrid combiner averages
nearest-matched points across several sources with convex weights, and the
sweep routines enumerate weight grids to find the best-performing mix.

All neighbor searches use Euclidean distance on features standardized by the
training-set mean/std; ties go to the lowest row index.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import norm

from ._util import Standardizer, rng_for
from .ingest import Dataset, FeatureSchema
from .models import ModelSpec, evaluate
from .models.metrics import Metrics

POOL_METHODS = ("smote", "adasyn", "generative")


class BalanceError(ValueError):
    pass


class NeighborError(BalanceError):
    pass


class PoolSchemaError(BalanceError):
    pass


class ExhaustionError(BalanceError):
    pass


@dataclass(frozen=True)
class BalancerSpec:
    """One minority-sample source: method name plus its knobs."""

    method: str  # "ros" | "smote" | "adasyn" | "generative"
    k: int = 5
    source: str | None = None  # generative only: None/"copula" or a CSV path

    def __post_init__(self):
        if self.method not in POOL_METHODS + ("ros",):
            raise BalanceError(f"unknown balancing method {self.method!r}")
        if self.k < 1:
            raise BalanceError("neighbor count k must be >= 1")


@dataclass(frozen=True)
class SyntheticPool:
    """Generated minority-class rows, tagged with their producing method."""

    samples: np.ndarray  # (M, d) raw feature space
    method: str
    seed: int
    standardizer: Standardizer

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise PoolSchemaError("samples must be a 2-d matrix")
        if samples.size and not np.isfinite(samples).all():
            raise PoolSchemaError("synthetic samples contain non-finite values")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class HybridWeights:
    """Convex weights over 2 or 3 constituent methods."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < 2 or len(self.values) > 3:
            raise BalanceError("hybrid weights cover 2 or 3 methods")
        if any(w < 0.0 or w > 1.0 for w in self.values):
            raise BalanceError("weights must lie in [0, 1]")
        if abs(sum(self.values) - 1.0) > 1e-9:
            raise BalanceError(f"weights must sum to 1, got {sum(self.values)!r}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SweepResult:
    weights: HybridWeights
    metrics: Metrics | None
    seeds: tuple[int, ...]
    error: str | None = None


def _minority_majority(ds: Dataset) -> tuple[int, np.ndarray, np.ndarray]:
    """(minority label, minority row indices, majority row indices)."""
    neg, pos = ds.class_counts()
    if neg == 0 or pos == 0:
        raise BalanceError("both classes must be present")
    minority = 1 if pos <= neg else 0
    return (
        minority,
        np.flatnonzero(ds.y == minority),
        np.flatnonzero(ds.y != minority),
    )


def _round_categoricals(samples: np.ndarray, schema: FeatureSchema | None) -> np.ndarray:
    """Snap categorical columns to the nearest valid code after interpolation."""
    if schema is None:
        return samples
    codes = schema.categorical_codes()
    for col, valid in codes.items():
        nearest = np.argmin(np.abs(samples[:, col][:, None] - valid[None, :]), axis=1)
        samples[:, col] = valid[nearest]
    return samples


def random_oversample(train: Dataset, seed: int = 0) -> Dataset:
    """Duplicate minority rows uniformly with replacement until parity."""
    minority, min_idx, maj_idx = _minority_majority(train)
    deficit = len(maj_idx) - len(min_idx)
    if deficit == 0:
        return train
    rng = rng_for(seed, "ros")
    dup = min_idx[rng.integers(0, len(min_idx), size=deficit)]
    keep = np.concatenate([np.arange(len(train)), dup])
    return Dataset(
        X=train.X[keep], y=train.y[keep], schema=train.schema, ids=train.ids[keep]
    )


def _minority_knn(X_std: np.ndarray, k: int) -> np.ndarray:
    """Indices of each row's k nearest neighbors (self excluded, stable ties)."""
    dist = cdist(X_std, X_std)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def smote(train: Dataset, k: int = 5, n_new: int | None = None, seed: int = 0) -> SyntheticPool:
    """Interpolate between minority points and their k nearest minority
    neighbors: x + delta * (neighbor - x) with delta ~ Uniform(0, 1).
    """
    minority, min_idx, maj_idx = _minority_majority(train)
    if len(min_idx) <= k:
        raise NeighborError(
            f"SMOTE needs more than k={k} minority rows, have {len(min_idx)}"
        )
    if n_new is None:
        n_new = len(maj_idx) - len(min_idx)

    std = Standardizer.fit(train.X)
    X_min = train.X[min_idx]
    neighbors = _minority_knn(std.transform(X_min), k)

    rng = rng_for(seed, "smote")
    out = np.empty((n_new, train.X.shape[1]))
    for i in range(n_new):
        a = rng.integers(0, len(min_idx))
        b = neighbors[a, rng.integers(0, k)]
        delta = rng.uniform()
        out[i] = X_min[a] + delta * (X_min[b] - X_min[a])
    out = _round_categoricals(out, train.schema)
    return SyntheticPool(samples=out, method="smote", seed=seed, standardizer=std)


def adasyn_allocations(r: np.ndarray, total: int) -> np.ndarray:
    """Per-point sample counts proportional to border scores r (rounded).

    All-zero scores fall back to a uniform allocation summing exactly to
    ``total``; the caller warns about it.
    """
    if r.sum() == 0.0:
        m = len(r)
        base, rem = divmod(total, m)
        out = np.full(m, base, dtype=np.int64)
        out[:rem] += 1
        return out
    r_hat = r / r.sum()
    return np.rint(r_hat * total).astype(np.int64)


def adasyn(train: Dataset, k: int = 5, seed: int = 0) -> SyntheticPool:
    """Density-adaptive interpolation: minority points with more majority
    neighbors (over the whole training set) receive more synthetic samples.
    """
    minority, min_idx, maj_idx = _minority_majority(train)
    if len(min_idx) <= k:
        raise NeighborError(
            f"ADASYN needs more than k={k} minority rows, have {len(min_idx)}"
        )
    G = len(maj_idx) - len(min_idx)

    std = Standardizer.fit(train.X)
    X_std = std.transform(train.X)
    X_min = train.X[min_idx]

    # k nearest neighbors of each minority point over the full training set
    dist = cdist(X_std[min_idx], X_std)
    dist[np.arange(len(min_idx)), min_idx] = np.inf  # exclude self
    nn_all = np.argsort(dist, axis=1, kind="stable")[:, :k]
    is_majority = train.y[nn_all] != minority
    r = is_majority.sum(axis=1) / k

    if r.sum() == 0.0:
        warnings.warn(
            "ADASYN: no minority point has majority neighbors; "
            "falling back to uniform allocation"
        )
    g = adasyn_allocations(r, G)

    neighbors = _minority_knn(std.transform(X_min), k)
    rng = rng_for(seed, "adasyn")
    rows = []
    for i, gi in enumerate(g):
        for _ in range(int(gi)):
            b = neighbors[i, rng.integers(0, k)]
            delta = rng.uniform()
            rows.append(X_min[i] + delta * (X_min[b] - X_min[i]))
    out = np.asarray(rows) if rows else np.empty((0, train.X.shape[1]))
    out = _round_categoricals(out, train.schema)
    return SyntheticPool(samples=out, method="adasyn", seed=seed, standardizer=std)


# -- generative stand-in ----------------------------------------------------


def _copula_sample(
    X_fit: np.ndarray, n_new: int, rng: np.random.Generator, categorical_cols: set[int]
) -> np.ndarray:
    """Gaussian copula: normal-score correlations + per-feature empirical
    quantile inversion (step inverse for categorical columns)."""
    n, d = X_fit.shape
    ranks = np.empty((n, d))
    for j in range(d):
        order = np.argsort(X_fit[:, j], kind="stable")
        r = np.empty(n)
        r[order] = np.arange(1, n + 1)
        ranks[:, j] = r
    z = norm.ppf((ranks - 0.5) / n)
    corr = np.corrcoef(z, rowvar=False)
    corr = np.atleast_2d(corr)

    # repair tiny negative eigenvalues so Cholesky-style sampling is defined
    vals, vecs = np.linalg.eigh(corr)
    vals = np.clip(vals, 1e-10, None)
    root = vecs * np.sqrt(vals)

    w = rng.standard_normal((n_new, d)) @ root.T
    u = norm.cdf(w)
    out = np.empty((n_new, d))
    for j in range(d):
        method = "inverted_cdf" if j in categorical_cols else "linear"
        out[:, j] = np.quantile(X_fit[:, j], u[:, j], method=method)
    return out


def _read_external_pool(path: Path, schema: FeatureSchema, n_new: int) -> np.ndarray:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PoolSchemaError(f"{path}: empty synthetic-sample file") from None
        expected = [n.lower() for n in schema.names]
        if [h.lower() for h in header] != expected:
            raise PoolSchemaError(
                f"{path}: header {header} does not match the feature schema {list(schema.names)}"
            )
        rows = []
        for record in reader:
            if not record:
                continue
            rows.append([float(c) for c in record])
    if len(rows) < n_new:
        raise ExhaustionError(
            f"{path}: requested {n_new} synthetic rows but the file holds {len(rows)}"
        )
    return np.asarray(rows[:n_new])


def generative_sample(
    train: Dataset, source: str | None, n_new: int, seed: int = 0
) -> SyntheticPool:
    """Minority samples from the pluggable generative source.

    ``source`` is None/"copula" for the built-in Gaussian-copula sampler
    fitted to the minority class, or a CSV path of pre-generated rows whose
    header matches the feature schema.
    """
    minority, min_idx, _ = _minority_majority(train)
    std = Standardizer.fit(train.X)
    if source in (None, "copula"):
        rng = rng_for(seed, "copula")
        cat_cols = set(train.schema.categorical_codes())
        out = _copula_sample(train.X[min_idx], n_new, rng, cat_cols)
        out = _round_categoricals(out, train.schema)
    else:
        out = _read_external_pool(Path(source), train.schema, n_new)
    return SyntheticPool(samples=out, method="generative", seed=seed, standardizer=std)


def make_pool(spec: BalancerSpec, train: Dataset, n_new: int, seed: int) -> SyntheticPool:
    if spec.method == "smote":
        return smote(train, k=spec.k, n_new=n_new, seed=seed)
    if spec.method == "adasyn":
        return adasyn(train, k=spec.k, seed=seed)
    if spec.method == "generative":
        return generative_sample(train, spec.source, n_new, seed=seed)
    raise BalanceError(f"method {spec.method!r} does not produce sample pools")


# -- hybrid combination ------------------------------------------------------


def _take_rows(samples: np.ndarray, n: int) -> np.ndarray:
    """First n rows; pools short of the request (ADASYN rounding slack) cycle."""
    if len(samples) >= n:
        return samples[:n].copy()
    idx = np.arange(n) % len(samples)
    return samples[idx]


def hybrid_combine(
    pools: list[SyntheticPool],
    weights: HybridWeights | tuple[float, ...],
    n_new: int,
    seed: int = 0,
    schema: FeatureSchema | None = None,
) -> SyntheticPool:
    """Weighted average of nearest-matched tuples across pools.

    Each output row anchors on a uniformly drawn sample of the first
    active pool, matches it to its nearest neighbor (standardized
    Euclidean) in every other active pool, and emits the convex
    combination. Zero-weight methods are skipped entirely; with a single
    active method the output is that pool's rows verbatim.
    """
    if not isinstance(weights, HybridWeights):
        weights = HybridWeights(tuple(float(w) for w in weights))
    if not pools:
        raise BalanceError("no pools given")
    if len(pools) != len(weights):
        raise BalanceError(f"{len(pools)} pools but {len(weights)} weights")
    if any(len(p) == 0 for p in pools):
        raise BalanceError("all pools must be nonempty")
    d = pools[0].samples.shape[1]
    if any(p.samples.shape[1] != d for p in pools):
        raise PoolSchemaError("pools have mismatched feature dimensions")

    active = [i for i, w in enumerate(weights.values) if w > 0.0]
    tag = "+".join(f"{pools[i].method}:{weights.values[i]:g}" for i in active)

    if len(active) == 1:
        base = pools[active[0]]
        return SyntheticPool(
            samples=_take_rows(base.samples, n_new),
            method=tag,
            seed=seed,
            standardizer=base.standardizer,
        )

    anchor = pools[active[0]]
    std = anchor.standardizer
    anchor_std = std.transform(anchor.samples)
    matched = {active[0]: np.arange(len(anchor))}
    for i in active[1:]:
        other_std = std.transform(pools[i].samples)
        # argmin returns the first (lowest-index) minimizer
        matched[i] = np.argmin(cdist(anchor_std, other_std), axis=1)

    rng = rng_for(seed, "hybrid")
    picks = rng.integers(0, len(anchor), size=n_new)
    out = np.zeros((n_new, d))
    for i in active:
        rows = pools[i].samples[matched[i][picks]]
        out += weights.values[i] * rows
    out = _round_categoricals(out, schema)
    return SyntheticPool(samples=out, method=tag, seed=seed, standardizer=std)


def rebalance(
    train: Dataset,
    specs: list[BalancerSpec],
    weights: HybridWeights | tuple[float, ...] | None = None,
    seed: int = 0,
) -> Dataset:
    """Top the minority class up to exact parity.

    Every constituent method generates the full deficit so the combiner has
    a complete candidate set; the combined pool is appended to the training
    set with fresh negative ids marking synthetic rows.
    """
    if len(specs) == 1 and specs[0].method == "ros":
        return random_oversample(train, seed=seed)

    minority, min_idx, maj_idx = _minority_majority(train)
    deficit = len(maj_idx) - len(min_idx)
    if deficit == 0:
        return train
    if weights is None:
        weights = (1.0,) * len(specs) if len(specs) == 1 else None
    if weights is None:
        raise BalanceError("weights required for multi-method balancing")

    pools = [
        make_pool(spec, train, deficit, int(rng_for(seed, "pool", i).integers(2**31)))
        for i, spec in enumerate(specs)
    ]
    if len(specs) == 1:
        samples = _take_rows(pools[0].samples, deficit)
    else:
        combined = hybrid_combine(
            pools, weights, deficit,
            seed=int(rng_for(seed, "combine").integers(2**31)),
            schema=train.schema,
        )
        samples = combined.samples

    X = np.vstack([train.X, samples])
    y = np.concatenate([train.y, np.full(deficit, minority, dtype=np.int8)])
    ids = np.concatenate([train.ids, -np.arange(1, deficit + 1, dtype=np.int64)])
    return Dataset(X=X, y=y, schema=train.schema, ids=ids)


# -- weight sweeps ------------------------------------------------------------


def pair_weight_grid(step: float = 0.05) -> list[tuple[float, float]]:
    """(lam, 1-lam) for lam = 0, step, ..., 1. Step must divide 1 exactly."""
    frac = Fraction(str(step))
    if (1 / frac).denominator != 1:
        raise BalanceError(f"step {step} does not divide 1 exactly")
    n = int(1 / frac)
    return [(float(Fraction(i, n)), float(1 - Fraction(i, n))) for i in range(n + 1)]


def triple_weight_grid(step: float = 0.05) -> list[tuple[float, float, float]]:
    """Exhaustive enumeration of the step-grid on the 3-way simplex."""
    frac = Fraction(str(step))
    if (1 / frac).denominator != 1:
        raise BalanceError(f"step {step} does not divide 1 exactly")
    n = int(1 / frac)
    grid = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            grid.append(
                (float(Fraction(i, n)), float(Fraction(j, n)), float(Fraction(k, n)))
            )
    return grid


def _eval_grid_point(args) -> SweepResult:
    train, test, specs, weights, model, n_runs, sub_seed = args
    seeds = tuple(sub_seed + i for i in range(n_runs))
    try:
        balanced = rebalance(train, specs, weights=weights, seed=sub_seed)
        metrics = evaluate(model, balanced, test, n_runs=n_runs, seed=sub_seed)
        return SweepResult(
            weights=HybridWeights(weights), metrics=metrics, seeds=seeds
        )
    except BalanceError as exc:
        return SweepResult(
            weights=HybridWeights(weights), metrics=None, seeds=seeds, error=str(exc)
        )


def _run_sweep(
    train: Dataset,
    test: Dataset,
    specs: list[BalancerSpec],
    grid: list[tuple],
    model: ModelSpec,
    n_runs: int,
    seed: int,
    n_jobs: int,
) -> list[SweepResult]:
    tasks = [
        (train, test, specs, weights, model, n_runs, int(rng_for(seed, "sweep", i).integers(2**31)))
        for i, weights in enumerate(grid)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_eval_grid_point, tasks))
    else:
        results = [_eval_grid_point(t) for t in tasks]
    # best F1 first; failed points sink to the bottom
    results.sort(key=lambda r: (r.metrics.f1 if r.metrics else -1.0), reverse=True)
    return results


def sweep_pair(
    train: Dataset,
    test: Dataset,
    method_a: BalancerSpec,
    method_b: BalancerSpec,
    model: ModelSpec | None = None,
    step: float = 0.05,
    n_runs: int = 3,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[SweepResult]:
    """Evaluate (lam, 1-lam) mixes of two methods over the step grid."""
    model = model or ModelSpec("gbt")
    grid = pair_weight_grid(step)
    return _run_sweep(train, test, [method_a, method_b], grid, model, n_runs, seed, n_jobs)


def sweep_triple(
    train: Dataset,
    test: Dataset,
    methods: list[BalancerSpec] | None = None,
    model: ModelSpec | None = None,
    step: float = 0.05,
    n_runs: int = 3,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[SweepResult]:
    """Evaluate every weight triple on the step-grid simplex.

    Default methods follow the (smote, generative, adasyn) ordering used in
    the reported optimal-weight tables.
    """
    if methods is None:
        methods = [
            BalancerSpec("smote"),
            BalancerSpec("generative"),
            BalancerSpec("adasyn"),
        ]
    if len(methods) != 3:
        raise BalanceError("triple sweep needs exactly 3 methods")
    model = model or ModelSpec("gbt")
    grid = triple_weight_grid(step)
    return _run_sweep(train, test, methods, grid, model, n_runs, seed, n_jobs)


def write_sweep_csv(results: list[SweepResult], path: str | Path, header_comment: str | None = None) -> None:
    """Sweep table: w_1..w_m, the four metrics, and the seeds used."""
    if not results:
        raise BalanceError("no sweep results to write")
    m = len(results[0].weights)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [f"w_{i + 1}" for i in range(m)]
            + ["accuracy", "precision", "recall", "f1", "seed_list", "error"]
        )
        for r in results:
            metric_cells = (
                [r.metrics.accuracy, r.metrics.precision, r.metrics.recall, r.metrics.f1]
                if r.metrics
                else ["", "", "", ""]
            )
            writer.writerow(
                [repr(w) for w in r.weights.values]
                + metric_cells
                + [" ".join(str(s) for s in r.seeds), r.error or ""]
            )
