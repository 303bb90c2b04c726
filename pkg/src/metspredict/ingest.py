"""Raw CSV ingestion: parsing, categorical encoding, imputation, splitting.

The expected input is a comma-delimited UTF-8 file with a header row and the
15 columns of the metabolic-syndrome cohort (sequence id, 13 measurements,
binary outcome). Empty cells are missing values. The marital-status column is
accepted on input but dropped from the feature set because of its high
missingness rate.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import rng_for

ID_COLUMN = "seqn"
LABEL_COLUMN = "MetabolicSyndrome"
DROPPED_COLUMNS = ("Marital",)

RAW_COLUMNS = (
    ID_COLUMN,
    "Age",
    "Sex",
    "Marital",
    "Income",
    "Race",
    "WaistCirc",
    "BMI",
    "Albuminuria",
    "UrAlbCr",
    "UricAcid",
    "BloodGlucose",
    "HDL",
    "Triglycerides",
    LABEL_COLUMN,
)

FEATURE_NAMES = tuple(
    c for c in RAW_COLUMNS if c not in (ID_COLUMN, LABEL_COLUMN) + DROPPED_COLUMNS
)

SEX_CODES = {"Male": 0, "Female": 1}
RACE_CODES = {
    "White": 0,
    "Asian": 1,
    "Black": 2,
    "MexAmerican": 3,
    "Hispanic": 4,
    "Other": 5,
}

# Ordinal urine-albumin grade; stored numerically in the raw file.
ALBUMINURIA_CODES = (0, 1, 2)

CATEGORICAL_FEATURES = ("Sex", "Race", "Albuminuria")

IMPUTED_COLUMNS = ("Income", "WaistCirc", "BMI")


class IngestError(ValueError):
    """Base class for ingestion failures."""


class ParseError(IngestError):
    pass


class SchemaError(IngestError):
    pass


class EncodingError(IngestError):
    pass


class ImputationError(IngestError):
    pass


class SplitError(IngestError):
    pass


@dataclass(frozen=True)
class RawTable:
    """Parsed CSV: one dict per row, canonical column names, None = missing."""

    columns: tuple[str, ...]
    rows: tuple[dict, ...]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class FeatureSchema:
    """Feature names, kinds, and the categorical encoding maps."""

    names: tuple[str, ...]
    kinds: dict[str, str]  # feature -> "numeric" | "categorical"
    encodings: dict[str, dict[str, int]]  # feature -> category string -> code

    @classmethod
    def default(cls) -> "FeatureSchema":
        kinds = {
            n: ("categorical" if n in CATEGORICAL_FEATURES else "numeric")
            for n in FEATURE_NAMES
        }
        return cls(
            names=FEATURE_NAMES,
            kinds=kinds,
            encodings={"Sex": dict(SEX_CODES), "Race": dict(RACE_CODES)},
        )

    @classmethod
    def generic(cls, n_features: int) -> "FeatureSchema":
        """All-numeric schema with placeholder names, for synthetic matrices."""
        names = tuple(f"f{i}" for i in range(n_features))
        return cls(names=names, kinds={n: "numeric" for n in names}, encodings={})

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def decode(self, feature: str, code: int) -> str:
        for category, c in self.encodings[feature].items():
            if c == code:
                return category
        raise EncodingError(f"code {code} not valid for feature {feature!r}")

    def categorical_codes(self) -> dict[int, np.ndarray]:
        """Valid integer codes per categorical feature, keyed by column index."""
        out: dict[int, np.ndarray] = {}
        for i, name in enumerate(self.names):
            if self.kinds[name] != "categorical":
                continue
            if name in self.encodings:
                codes = sorted(self.encodings[name].values())
            elif name == "Albuminuria":
                codes = list(ALBUMINURIA_CODES)
            else:
                continue
            out[i] = np.asarray(codes, dtype=np.float64)
        return out


@dataclass(frozen=True)
class EncodedTable:
    """Numeric matrix with an explicit missing-cell mask.

    ``values`` holds NaN placeholders wherever ``missing`` is True; the mask
    is the authority, so no arithmetic may consume ``values`` before
    imputation clears the mask.
    """

    values: np.ndarray  # (n, d) float64
    missing: np.ndarray  # (n, d) bool
    schema: FeatureSchema
    labels: np.ndarray  # (n,) int8 in {0, 1}
    ids: np.ndarray  # (n,) int64


@dataclass(frozen=True)
class Dataset:
    """Complete feature matrix + labels, the unit every stage operates on."""

    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema
    ids: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise SchemaError("X must be a 2-d matrix")
        if not np.isfinite(X).all():
            raise SchemaError("dataset contains missing or non-finite values")
        if X.shape[1] != len(self.schema.names):
            raise SchemaError(
                f"X has {X.shape[1]} columns, schema names {len(self.schema.names)}"
            )
        y = np.asarray(self.y)
        if not np.isin(y, (0, 1)).all():
            raise SchemaError("labels must be 0/1")
        if len(y) != len(X) or len(self.ids) != len(X):
            raise SchemaError("X, y, ids length mismatch")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int8))
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.y)

    def class_counts(self) -> tuple[int, int]:
        """(count of class 0, count of class 1)."""
        pos = int(self.y.sum())
        return len(self.y) - pos, pos


@dataclass(frozen=True)
class TrainTestSplit:
    train: Dataset
    test: Dataset
    seed: int
    test_fraction: float


def _canonical_columns(header: list[str]) -> dict[int, str]:
    """Match header names to canonical columns, case-insensitive and trimmed."""
    canon = {c.lower(): c for c in RAW_COLUMNS}
    mapping: dict[int, str] = {}
    seen: set[str] = set()
    for i, raw_name in enumerate(header):
        name = canon.get(raw_name.strip().lower())
        if name is None:
            warnings.warn(f"ignoring unrecognized column {raw_name.strip()!r}")
            continue
        if name in seen:
            raise SchemaError(f"duplicate column {name!r}")
        seen.add(name)
        mapping[i] = name
    absent = [c for c in RAW_COLUMNS if c not in seen]
    if absent:
        raise SchemaError(f"missing required column(s): {', '.join(absent)}")
    return mapping


def load_csv(path: str | Path) -> RawTable:
    """Read the raw cohort CSV. Empty cells become None (missing)."""
    path = Path(path)
    rows: list[dict] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a header row") from None
        mapping = _canonical_columns(header)
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"{path}: row {line_no} has {len(record)} cells, expected {len(header)}"
                )
            row = {}
            for i, name in mapping.items():
                cell = record[i].strip()
                row[name] = cell if cell != "" else None
            rows.append(row)
    return RawTable(columns=RAW_COLUMNS, rows=tuple(rows))


def _parse_number(value: str, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"cannot parse {value!r} in column {column!r}") from None


def encode_and_clean(raw: RawTable) -> EncodedTable:
    """Drop marital status, encode sex/race, parse numerics, mark missing cells.

    Rows whose outcome label is missing are dropped (with a warning): labels
    are ground truth and are never imputed.
    """
    schema = FeatureSchema.default()
    lowered = {
        feat: {cat.lower(): code for cat, code in m.items()}
        for feat, m in schema.encodings.items()
    }

    kept_rows = []
    n_dropped = 0
    for row in raw.rows:
        if row[LABEL_COLUMN] is None:
            n_dropped += 1
            continue
        kept_rows.append(row)
    if n_dropped:
        warnings.warn(f"dropped {n_dropped} row(s) with missing outcome label")

    n, d = len(kept_rows), len(schema.names)
    values = np.full((n, d), np.nan)
    missing = np.zeros((n, d), dtype=bool)
    labels = np.zeros(n, dtype=np.int8)
    ids = np.zeros(n, dtype=np.int64)

    for r, row in enumerate(kept_rows):
        raw_label = row[LABEL_COLUMN]
        label = _parse_number(raw_label, LABEL_COLUMN)
        if label not in (0.0, 1.0):
            raise EncodingError(f"label {raw_label!r} is not 0/1")
        labels[r] = int(label)
        if row[ID_COLUMN] is None:
            raise ParseError(f"row with label {raw_label!r} is missing its {ID_COLUMN}")
        ids[r] = int(_parse_number(row[ID_COLUMN], ID_COLUMN))
        for c, name in enumerate(schema.names):
            cell = row[name]
            if cell is None:
                missing[r, c] = True
                continue
            if name in lowered:
                code = lowered[name].get(cell.lower())
                if code is None:
                    raise EncodingError(
                        f"unknown category {cell!r} in column {name!r}"
                    )
                values[r, c] = float(code)
            else:
                values[r, c] = _parse_number(cell, name)

    return EncodedTable(values=values, missing=missing, schema=schema, labels=labels, ids=ids)


def impute_mean(
    values: np.ndarray,
    missing: np.ndarray,
    schema: FeatureSchema,
    columns: tuple[str, ...] = IMPUTED_COLUMNS,
) -> np.ndarray:
    """Replace missing cells in the named columns by the column mean.

    The mean is taken over non-missing entries of the full table. Columns not
    listed are left untouched.
    """
    out = values.copy()
    for name in columns:
        c = schema.index(name)
        observed = ~missing[:, c]
        if not observed.any():
            raise ImputationError(f"column {name!r} has no observed values to average")
        mean = out[observed, c].mean()
        out[missing[:, c], c] = mean
    return out


def preprocess(path: str | Path) -> Dataset:
    """load -> encode -> impute -> validated Dataset, in one call."""
    table = encode_and_clean(load_csv(path))
    X = impute_mean(table.values, table.missing, table.schema)
    return Dataset(X=X, y=table.labels, schema=table.schema, ids=table.ids)


def write_processed_csv(ds: Dataset, path: str | Path, header_comment: str | None = None) -> None:
    """Encoded/imputed dataset as CSV: seqn, the 12 features, the label.

    Float cells use repr so a read-back reproduces the matrix bit-exactly.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow([ID_COLUMN, *ds.schema.names, LABEL_COLUMN])
        for i in range(len(ds)):
            writer.writerow(
                [int(ds.ids[i])] + [repr(float(v)) for v in ds.X[i]] + [int(ds.y[i])]
            )


def read_processed_csv(path: str | Path) -> Dataset:
    """Read a dataset written by write_processed_csv (skips # comments)."""
    path = Path(path)
    schema = FeatureSchema.default()
    ids, rows, labels = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        reader = csv.reader(lines)
        header = next(reader, None)
        expected = [ID_COLUMN, *schema.names, LABEL_COLUMN]
        if header is None or [h.strip() for h in header] != expected:
            raise SchemaError(f"{path}: not a processed dataset file")
        for record in reader:
            if not record:
                continue
            ids.append(int(record[0]))
            rows.append([float(c) for c in record[1:-1]])
            labels.append(int(record[-1]))
    return Dataset(
        X=np.asarray(rows), y=np.asarray(labels), schema=schema,
        ids=np.asarray(ids, dtype=np.int64),
    )


def split_balanced(
    ds: Dataset, test_fraction: float = 0.33, seed: int = 0
) -> TrainTestSplit:
    """Random train/test split with an exactly class-balanced test set.

    The test set holds 2*floor(test_fraction*N/2) rows, half per class, drawn
    uniformly without replacement; everything else is the training set.
    """
    if not 0.0 < test_fraction < 1.0:
        raise SplitError("test_fraction must be in (0, 1)")
    n = len(ds)
    per_class = math.floor(test_fraction * n / 2)
    if per_class < 1:
        raise SplitError("dataset too small for the requested test fraction")
    neg, pos = ds.class_counts()
    smallest = min(neg, pos)
    if smallest < per_class:
        raise SplitError(
            f"need {per_class} test rows per class but the minority class has only {smallest}"
        )

    rng = rng_for(seed, "split")
    test_idx = []
    for cls in (0, 1):
        pool = np.flatnonzero(ds.y == cls)
        test_idx.append(rng.choice(pool, size=per_class, replace=False))
    test_mask = np.zeros(n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True

    def subset(mask: np.ndarray) -> Dataset:
        return Dataset(X=ds.X[mask], y=ds.y[mask], schema=ds.schema, ids=ds.ids[mask])

    return TrainTestSplit(
        train=subset(~test_mask),
        test=subset(test_mask),
        seed=seed,
        test_fraction=test_fraction,
    )
