"""Probabilistic risk stratification over clinical thresholds.

Each risk factor is a comparator + cutoff over a raw (pre-standardization)
feature, optionally sex-specific. From the flagged rows the module counts
its way to the prevalence prior, per-factor likelihoods P(flag | outcome),
evidence P(flag), and posteriors P(outcome | flag) via Bayes' theorem. All
ratios live on integer counts until reporting, so the Bayes identity
posterior = likelihood * prior / evidence holds exactly in rational
arithmetic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .ingest import Dataset


class RiskError(ValueError):
    pass


_COMPARATORS = {
    ">=": lambda v, c: v >= c,
    "<": lambda v, c: v < c,
    ">": lambda v, c: v > c,
    "<=": lambda v, c: v <= c,
}


@dataclass(frozen=True)
class FactorThreshold:
    """One clinical flag: feature, comparator, cutoff(s).

    Sex-specific factors give male/female cutoffs instead of a single one;
    the row's sex code (0 male, 1 female) selects which applies.
    """

    feature: str
    comparator: str
    cutoff: float | None = None
    male_cutoff: float | None = None
    female_cutoff: float | None = None
    additional: bool = False  # reported outside the headline factor table

    def __post_init__(self):
        if self.comparator not in _COMPARATORS:
            raise RiskError(f"unknown comparator {self.comparator!r}")
        sex_specific = self.male_cutoff is not None or self.female_cutoff is not None
        if sex_specific and (self.male_cutoff is None or self.female_cutoff is None):
            raise RiskError(f"{self.feature}: both sex-specific cutoffs are required")
        if not sex_specific and self.cutoff is None:
            raise RiskError(f"{self.feature}: a cutoff is required")

    @property
    def sex_specific(self) -> bool:
        return self.male_cutoff is not None

    def describe(self) -> str:
        if self.sex_specific:
            return (
                f"{self.feature} {self.comparator} {self.male_cutoff:g} (male) / "
                f"{self.female_cutoff:g} (female)"
            )
        return f"{self.feature} {self.comparator} {self.cutoff:g}"


DEFAULT_FACTORS: dict[str, FactorThreshold] = {
    # headline factors
    "glucose": FactorThreshold("BloodGlucose", ">=", 100.0),
    "bmi": FactorThreshold("BMI", ">=", 30.0),
    "triglycerides": FactorThreshold("Triglycerides", ">=", 150.0),
    "uralbcr": FactorThreshold("UrAlbCr", ">=", 30.0),
    "albuminuria": FactorThreshold("Albuminuria", ">=", 1.0),
    # additional factors: computed and reported separately
    "waist": FactorThreshold(
        "WaistCirc", ">=", male_cutoff=94.0, female_cutoff=80.0, additional=True
    ),
    "hdl_low": FactorThreshold(
        "HDL", "<", male_cutoff=40.0, female_cutoff=50.0, additional=True
    ),
    "age": FactorThreshold(
        "Age", ">=", male_cutoff=40.0, female_cutoff=51.0, additional=True
    ),
}


@dataclass(frozen=True)
class ThresholdSpec:
    factors: dict[str, FactorThreshold] = field(
        default_factory=lambda: dict(DEFAULT_FACTORS)
    )

    @classmethod
    def from_file(cls, path: str | Path) -> "ThresholdSpec":
        """Load cutoffs from a JSON key-value file (see to_file for shape)."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        factors = {}
        for name, entry in raw.items():
            factors[name] = FactorThreshold(
                feature=entry["feature"],
                comparator=entry["comparator"],
                cutoff=entry.get("cutoff"),
                male_cutoff=entry.get("male_cutoff"),
                female_cutoff=entry.get("female_cutoff"),
                additional=bool(entry.get("additional", False)),
            )
        return cls(factors=factors)

    def to_file(self, path: str | Path) -> None:
        out = {}
        for name, f in self.factors.items():
            entry: dict = {"feature": f.feature, "comparator": f.comparator}
            if f.sex_specific:
                entry["male_cutoff"] = f.male_cutoff
                entry["female_cutoff"] = f.female_cutoff
            else:
                entry["cutoff"] = f.cutoff
            if f.additional:
                entry["additional"] = True
            out[name] = entry
        Path(path).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class RiskFlags:
    """Boolean flag per row per factor, in ``factor_names`` order."""

    flags: np.ndarray  # (n_rows, n_factors) bool
    factor_names: tuple[str, ...]

    def column(self, factor: str) -> np.ndarray:
        try:
            j = self.factor_names.index(factor)
        except ValueError:
            raise RiskError(f"unknown factor {factor!r}") from None
        return self.flags[:, j]


def flag_rows(ds: Dataset, spec: ThresholdSpec | None = None) -> RiskFlags:
    """Evaluate every factor's threshold on raw feature values."""
    spec = spec or ThresholdSpec()
    names = tuple(spec.factors)
    flags = np.zeros((len(ds), len(names)), dtype=bool)
    sex_col = None
    if any(f.sex_specific for f in spec.factors.values()):
        sex_col = ds.X[:, ds.schema.index("Sex")]
    for j, name in enumerate(names):
        f = spec.factors[name]
        values = ds.X[:, ds.schema.index(f.feature)]
        cmp = _COMPARATORS[f.comparator]
        if f.sex_specific:
            cutoffs = np.where(sex_col == 0, f.male_cutoff, f.female_cutoff)
            flags[:, j] = cmp(values, cutoffs)
        else:
            flags[:, j] = cmp(values, f.cutoff)
    return RiskFlags(flags=flags, factor_names=names)


def compute_prior(ds: Dataset) -> float:
    """Outcome prevalence: positives / N."""
    if len(ds) == 0:
        raise RiskError("empty dataset")
    return float(ds.y.sum() / len(ds))


def compute_likelihood(ds: Dataset, flags: RiskFlags, factor: str) -> float:
    """P(flag | outcome present) by direct counting."""
    pos = ds.y == 1
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise RiskError("no positive rows: likelihood undefined")
    return float(int((flags.column(factor) & pos).sum()) / n_pos)


def compute_evidence(ds: Dataset, flags: RiskFlags, factor: str) -> float:
    """P(flag) over the whole dataset."""
    if len(ds) == 0:
        raise RiskError("empty dataset")
    return float(int(flags.column(factor).sum()) / len(ds))


def compute_posterior(ds: Dataset, flags: RiskFlags, factor: str) -> float:
    """P(outcome | flag) = likelihood * prior / evidence.

    On integer counts this reduces exactly to (#flag and positive) / #flag,
    and both routes are computed and compared before returning.
    """
    col = flags.column(factor)
    n = len(ds)
    n_pos = int(ds.y.sum())
    n_flag = int(col.sum())
    n_flag_pos = int((col & (ds.y == 1)).sum())
    if n_flag == 0:
        raise RiskError(f"factor {factor!r} flags no rows: posterior undefined")
    if n_pos == 0:
        raise RiskError("no positive rows: posterior undefined")
    bayes = (
        Fraction(n_flag_pos, n_pos) * Fraction(n_pos, n) / Fraction(n_flag, n)
    )
    direct = Fraction(n_flag_pos, n_flag)
    assert bayes == direct  # exact rational identity by construction
    return float(direct)


@dataclass(frozen=True)
class FactorReport:
    factor: str
    description: str
    additional: bool
    likelihood: float
    evidence: float
    posterior: float
    n_flag_pos: int
    n_pos: int
    n_flag: int
    n_total: int


@dataclass(frozen=True)
class ProbReport:
    prior: float
    n_pos: int
    n_total: int
    factors: tuple[FactorReport, ...]


def prob_report(ds: Dataset, spec: ThresholdSpec | None = None) -> ProbReport:
    """Prior plus per-factor likelihood/evidence/posterior with raw counts."""
    spec = spec or ThresholdSpec()
    flags = flag_rows(ds, spec)
    prior = compute_prior(ds)
    pos = ds.y == 1
    n, n_pos = len(ds), int(pos.sum())
    rows = []
    for name, factor in spec.factors.items():
        col = flags.column(name)
        n_flag = int(col.sum())
        n_flag_pos = int((col & pos).sum())
        rows.append(
            FactorReport(
                factor=name,
                description=factor.describe(),
                additional=factor.additional,
                likelihood=compute_likelihood(ds, flags, name),
                evidence=compute_evidence(ds, flags, name),
                posterior=compute_posterior(ds, flags, name),
                n_flag_pos=n_flag_pos,
                n_pos=n_pos,
                n_flag=n_flag,
                n_total=n,
            )
        )
    return ProbReport(prior=prior, n_pos=n_pos, n_total=n, factors=tuple(rows))


def write_report_csv(report: ProbReport, path: str | Path, header_comment: str | None = None) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "factor",
                "additional",
                "likelihood",
                "evidence",
                "posterior",
                "n_flag_pos",
                "n_pos",
                "n_flag",
                "n_total",
            ]
        )
        for r in report.factors:
            writer.writerow(
                [
                    r.factor,
                    int(r.additional),
                    repr(r.likelihood),
                    repr(r.evidence),
                    repr(r.posterior),
                    r.n_flag_pos,
                    r.n_pos,
                    r.n_flag,
                    r.n_total,
                ]
            )


def format_report_text(report: ProbReport) -> str:
    lines = [
        f"Prevalence prior: {report.prior:.3f} ({report.n_pos}/{report.n_total})",
        "",
        "Factor likelihood/posterior (sorted by posterior):",
    ]

    def block(rows: list[FactorReport]) -> list[str]:
        out = []
        for r in sorted(rows, key=lambda r: r.posterior, reverse=True):
            out.append(
                f"  {r.factor:<14s} {r.description:<42s} "
                f"likelihood {r.likelihood * 100:5.1f}%  posterior {r.posterior * 100:5.1f}%  "
                f"({r.n_flag_pos}/{r.n_pos} flagged+, {r.n_flag}/{r.n_total} flagged)"
            )
        return out

    lines += block([r for r in report.factors if not r.additional])
    extra = [r for r in report.factors if r.additional]
    if extra:
        lines += ["", "Additional factors:"]
        lines += block(extra)
    return "\n".join(lines) + "\n"
