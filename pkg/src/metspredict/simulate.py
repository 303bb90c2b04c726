"""Deterministic simulated cohort for demos and self-contained testing.

The generator emits a raw CSV with the same 15 columns as the real
metabolic-syndrome cohort. Class prevalence and the flag-by-outcome
contingency tables of the headline clinical risk factors are planted to
match the published population statistics exactly (counts are assigned, not
sampled), while the continuous measurements are drawn from plausible
clinical distributions conditioned on flag state, outcome, and sex. Missing
cells appear in the income, waist, and BMI columns at realistic rates, and
marital status is heavily missing, mirroring why the pipeline drops it.

This is a stand-in, not the real cohort: use it to exercise the machinery
end to end when the reference CSV is unavailable.
"""

from __future__ import annotations

import csv
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._util import rng_for

# Reference cohort size and positive count the planted tables refer to.
REF_N = 2401
REF_POS = 821

# (flagged positives, flagged negatives) at the reference size.
FACTOR_TABLES: dict[str, tuple[int, int]] = {
    "glucose": (702, 494),
    "bmi": (512, 343),
    "triglycerides": (449, 150),
    "uralbcr": (167, 145),
    "albuminuria": (131, 123),
}

# Supplementary factors: (rate among positives, rate among negatives).
ADDITIONAL_RATES: dict[str, tuple[float, float]] = {
    "waist": (0.84, 0.44),
    "hdl_low": (0.45, 0.27),
    "age": (0.62, 0.46),
}

# Outcome-conditional probability of being female.
FEMALE_RATES = (0.52, 0.50)  # (positives, negatives)

# Mean shift of uric acid for positives, in mg/dL.
URIC_SHIFT = 0.65

# Outcome-conditional spread of the flagged-value tails (positives reach
# deeper into the elevated range). Values below the cutoffs carry no direct
# outcome signal: that keeps the borderline region prior-sensitive, so
# training-set imbalance still matters to the learner.
FLAG_TAIL_DRIFT = 1.2

RACE_MARGINALS = {
    "White": 0.38,
    "Asian": 0.115,
    "Black": 0.21,
    "MexAmerican": 0.12,
    "Hispanic": 0.095,
    "Other": 0.08,
}

MARITAL_MARGINALS = {
    "Married": 0.52,
    "Single": 0.25,
    "Divorced": 0.11,
    "Widowed": 0.07,
    "Separated": 0.05,
}

MARITAL_MISSING_RATE = 0.0866
INCOME_MISSING = 117 / REF_N
WAIST_MISSING = 85 / REF_N
BMI_MISSING = 26 / REF_N

HEADER = [
    "seqn",
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
    "MetabolicSyndrome",
]


def _scaled_count(ref_count: int, ref_base: int, base: int) -> int:
    return int(round(Fraction(ref_count, ref_base) * base))


def _plant_flags(rng, pos_idx, neg_idx, n_pos_flag, n_neg_flag, n) -> np.ndarray:
    """Assign exact per-class flag counts uniformly at random.

    The contingency tables are planted, not sampled, so the cohort
    statistics are exact.
    """
    flags = np.zeros(n, dtype=bool)
    flags[rng.choice(pos_idx, size=n_pos_flag, replace=False)] = True
    flags[rng.choice(neg_idx, size=n_neg_flag, replace=False)] = True
    return flags


# Overlap strength for clinically redundant factor pairs (anchor, follower):
# 0 = independent, 1 = maximal nesting of the follower in the anchor.
COUPLED_FACTORS: dict[tuple[str, str], float] = {
    ("waist", "bmi"): 0.75,
    ("uralbcr", "albuminuria"): 0.9,
}


def _plant_coupled(rng, anchor_flags, pos_idx, neg_idx, n_pos_flag, n_neg_flag, n, rho) -> np.ndarray:
    """Plant exact per-class counts with tunable overlap with an anchor flag.

    The expected overlap interpolates between independence (rho = 0) and
    maximal nesting inside the anchor (rho = 1).
    """
    flags = np.zeros(n, dtype=bool)
    for idx, k in ((pos_idx, n_pos_flag), (neg_idx, n_neg_flag)):
        inside = idx[anchor_flags[idx]]
        outside = idx[~anchor_flags[idx]]
        max_overlap = min(k, len(inside))
        indep_overlap = k * len(inside) / len(idx)
        n_inside = int(round(rho * max_overlap + (1.0 - rho) * indep_overlap))
        n_inside = min(n_inside, max_overlap)
        n_inside = max(n_inside, k - len(outside))
        flags[rng.choice(inside, size=n_inside, replace=False)] = True
        flags[rng.choice(outside, size=k - n_inside, replace=False)] = True
    return flags


def _assign_categories(rng, n: int, marginals: dict[str, float]) -> np.ndarray:
    names = list(marginals)
    probs = np.array([marginals[k] for k in names])
    probs = probs / probs.sum()
    return rng.choice(np.array(names, dtype=object), size=n, p=probs)


def simulate_table(n_rows: int = REF_N, seed: int = 7) -> tuple[list[str], list[list[str]]]:
    """Generate (header, rows-of-strings) for the simulated cohort."""
    rng = rng_for(seed, "simulate")
    n = int(n_rows)
    n_pos = _scaled_count(REF_POS, REF_N, n)
    n_neg = n - n_pos

    y = np.zeros(n, dtype=np.int8)
    y[rng.choice(n, size=n_pos, replace=False)] = 1
    pos_idx = np.flatnonzero(y == 1)
    neg_idx = np.flatnonzero(y == 0)

    female = rng.random(n) < np.where(y == 1, FEMALE_RATES[0], FEMALE_RATES[1])
    race = _assign_categories(rng, n, RACE_MARGINALS)
    marital = _assign_categories(rng, n, MARITAL_MARGINALS)

    counts: dict[str, tuple[int, int]] = {}
    for name, (ref_fp, ref_fn) in FACTOR_TABLES.items():
        counts[name] = (
            _scaled_count(ref_fp, REF_POS, n_pos),
            _scaled_count(ref_fn, REF_N - REF_POS, n_neg),
        )
    for name, (rate_pos, rate_neg) in ADDITIONAL_RATES.items():
        counts[name] = (int(round(rate_pos * n_pos)), int(round(rate_neg * n_neg)))

    follower_of = {b: (a, rho) for (a, b), rho in COUPLED_FACTORS.items()}
    plant_order = [f for f in counts if f not in follower_of] + [
        f for f in counts if f in follower_of
    ]
    flags: dict[str, np.ndarray] = {}
    for name in plant_order:
        k_pos, k_neg = counts[name]
        if name in follower_of:
            anchor, rho = follower_of[name]
            flags[name] = _plant_coupled(
                rng, flags[anchor], pos_idx, neg_idx, k_pos, k_neg, n, rho
            )
        else:
            flags[name] = _plant_flags(rng, pos_idx, neg_idx, k_pos, k_neg, n)

    pos = y == 1

    def gamma(shape, scale, size):
        return rng.gamma(shape, scale, size=size)

    # Continuous measurements depend on the flag state (and sex where the
    # cutoff does); on the flagged side the outcome additionally stretches
    # or shrinks the tail.
    drift = np.where(pos, 1.0 + 0.3 * FLAG_TAIL_DRIFT, 1.0 - 0.3 * FLAG_TAIL_DRIFT)

    # Blood glucose (mg/dL, integer).
    glucose = np.empty(n)
    f = flags["glucose"]
    glucose[f] = 100 + gamma(1.6, 13.5, f.sum()) * drift[f]
    glucose[~f] = rng.normal(88.5, 6.2, (~f).sum())
    glucose = np.round(glucose)
    glucose[f] = np.maximum(glucose[f], 100)
    glucose[~f] = np.clip(glucose[~f], 63, 99)

    # BMI (kg/m^2, one decimal).
    bmi = np.empty(n)
    f = flags["bmi"]
    bmi[f] = 30.0 + gamma(1.7, 3.6, f.sum()) * drift[f]
    bmi[~f] = rng.normal(25.6, 2.8, (~f).sum())
    bmi = np.round(bmi, 1)
    bmi[f] = np.maximum(bmi[f], 30.0)
    bmi[~f] = np.clip(bmi[~f], 15.9, 29.9)

    # Triglycerides (mg/dL, integer), lognormal body with a long flagged tail.
    tri = np.empty(n)
    f = flags["triglycerides"]
    tri[f] = 150 + gamma(1.25, 82.0, f.sum()) * drift[f]
    tri[~f] = np.exp(rng.normal(4.52, 0.33, (~f).sum()))
    tri = np.round(tri)
    tri[f] = np.maximum(tri[f], 150)
    tri[~f] = np.clip(tri[~f], 35, 149)

    # Urine albumin-creatinine ratio (mg/g, two decimals).
    ura = np.empty(n)
    f = flags["uralbcr"]
    ura[f] = 30.0 + gamma(0.85, 55.0, f.sum())
    ura[~f] = np.exp(rng.normal(2.0, 0.75, (~f).sum()))
    ura = np.round(ura, 2)
    ura[f] = np.maximum(ura[f], 30.0)
    ura[~f] = np.clip(ura[~f], 1.12, 29.9)

    # Albuminuria grade: 0 absent, 1 moderate, 2 severe.
    alb = np.zeros(n)
    f = flags["albuminuria"]
    alb[f] = np.where(rng.random(f.sum()) < 0.85, 1.0, 2.0)

    # Waist circumference (cm, one decimal); cutoffs differ by sex.
    waist_cut = np.where(female, 80.0, 94.0)
    waist = np.empty(n)
    f = flags["waist"]
    waist[f] = waist_cut[f] + gamma(1.7, 9.3, f.sum()) * drift[f]
    waist[~f] = waist_cut[~f] - 1.0 - np.abs(rng.normal(0.0, 8.0, (~f).sum()))
    waist = np.round(waist, 1)
    waist[f] = np.maximum(waist[f], waist_cut[f])
    waist[~f] = np.clip(waist[~f], 61.0, waist_cut[~f] - 0.1)

    # HDL cholesterol (mg/dL, integer); low-HDL flag is a strict <.
    hdl_cut = np.where(female, 50.0, 40.0)
    hdl = np.empty(n)
    f = flags["hdl_low"]
    hdl[f] = hdl_cut[f] - 2.0 - gamma(1.4, 4.5, f.sum())
    hdl[~f] = hdl_cut[~f] + 2.5 + gamma(1.65, 7.5, (~f).sum())
    hdl = np.round(hdl)
    hdl[f] = np.clip(hdl[f], 20, hdl_cut[f] - 1)
    hdl[~f] = np.maximum(hdl[~f], hdl_cut[~f])

    # Age (years, integer); cutoffs differ by sex.
    age_cut = np.where(female, 51.0, 40.0)
    age = np.empty(n)
    f = flags["age"]
    age[f] = age_cut[f] + gamma(1.7, 9.0, f.sum())
    age[~f] = 19.0 + rng.random((~f).sum()) * (age_cut[~f] - 20.0)
    age = np.round(age)
    age[f] = np.clip(age[f], age_cut[f], 80)
    age[~f] = np.clip(age[~f], 19, age_cut[~f] - 1)

    # Uric acid (mg/dL, one decimal): mild outcome signal, no flag.
    uric = np.round(rng.normal(5.4, 1.35, n) + URIC_SHIFT * y, 1)
    uric = np.clip(uric, 1.8, 11.5)

    # Monthly income (integer): right-skewed, slightly lower for positives.
    income = np.exp(rng.normal(8.05, 0.55, n) - 0.06 * y)
    income = np.clip(np.round(income), 300, 9000)

    ids = 60001 + 3 * np.arange(n)

    missing_marital = rng.random(n) < MARITAL_MISSING_RATE
    missing_income = np.zeros(n, dtype=bool)
    missing_income[rng.choice(n, size=int(round(INCOME_MISSING * n)), replace=False)] = True
    # missing waist/BMI cells impute to the column mean (~92 cm / ~29 kg/m^2),
    # which is flagged for females and unflagged for BMI, so restricting the
    # missing pools accordingly keeps the planted flag counts exact after
    # imputation
    waist_pool = np.flatnonzero(flags["waist"] & female)
    bmi_pool = np.flatnonzero(~flags["bmi"])
    missing_waist = np.zeros(n, dtype=bool)
    missing_waist[rng.choice(waist_pool, size=min(len(waist_pool), int(round(WAIST_MISSING * n))), replace=False)] = True
    missing_bmi = np.zeros(n, dtype=bool)
    missing_bmi[rng.choice(bmi_pool, size=min(len(bmi_pool), int(round(BMI_MISSING * n))), replace=False)] = True

    rows = []
    for i in range(n):
        rows.append(
            [
                str(ids[i]),
                str(int(age[i])),
                "Female" if female[i] else "Male",
                "" if missing_marital[i] else str(marital[i]),
                "" if missing_income[i] else str(int(income[i])),
                str(race[i]),
                "" if missing_waist[i] else f"{waist[i]:.1f}",
                "" if missing_bmi[i] else f"{bmi[i]:.1f}",
                str(int(alb[i])),
                f"{ura[i]:.2f}",
                f"{uric[i]:.1f}",
                str(int(glucose[i])),
                str(int(hdl[i])),
                str(int(tri[i])),
                str(int(y[i])),
            ]
        )
    return HEADER, rows


def write_simulated_csv(path: str | Path, n_rows: int = REF_N, seed: int = 7) -> Path:
    """Write the simulated cohort CSV and return its path."""
    path = Path(path)
    header, rows = simulate_table(n_rows=n_rows, seed=seed)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path
