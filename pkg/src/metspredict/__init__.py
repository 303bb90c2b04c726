"""Metabolic-syndrome prediction toolkit.

Preprocessing and class-balanced splitting, four minority-oversampling
methods with a convex-weighted hybrid combiner and weight-grid sweeps,
from-scratch tree/forest/boosting/logistic classifiers with a repeated-run
evaluation protocol, nearest-unlike-neighbor counterfactual explanations,
and Bayesian risk stratification over clinical thresholds.
"""

__version__ = "0.1.0"

from .ingest import (
    Dataset,
    FeatureSchema,
    TrainTestSplit,
    load_csv,
    preprocess,
    split_balanced,
)
from .balance import (
    BalancerSpec,
    HybridWeights,
    SyntheticPool,
    adasyn,
    generative_sample,
    hybrid_combine,
    random_oversample,
    rebalance,
    smote,
    sweep_pair,
    sweep_triple,
)
from .models import (
    DecisionTreeClassifier,
    GradientBoostedTreesClassifier,
    LogisticRegressionClassifier,
    Metrics,
    ModelSpec,
    RandomForestClassifier,
    evaluate,
    load_model,
    save_model,
)
from .counterfactual import (
    CfResult,
    CfSummary,
    boundary_grid,
    feature_change_rates,
    generate_counterfactuals,
    nearest_unlike_neighbor,
    nice_counterfactual,
    summarize,
)
from .risk import (
    ProbReport,
    RiskFlags,
    ThresholdSpec,
    compute_likelihood,
    compute_posterior,
    compute_prior,
    flag_rows,
    prob_report,
)
from .simulate import simulate_table, write_simulated_csv

__all__ = [name for name in dir() if not name.startswith("_")]
