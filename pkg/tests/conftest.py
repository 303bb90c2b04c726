import numpy as np
import pytest

from metspredict.ingest import Dataset, FeatureSchema
from metspredict.simulate import write_simulated_csv

# The canonical simulated-cohort tuple used by the data-bound tests: the
# generator seed fixes the cohort, the split seed fixes train/test, and the
# evaluation seed fixes model training.
DATA_SEED = 10
SPLIT_SEED = 3
EVAL_SEED = 100


def toy_dataset(
    n_majority=60, n_minority=20, d=4, gap=2.0, seed=1, schema=None
) -> Dataset:
    """Two Gaussian blobs; minority is class 1."""
    rng = np.random.default_rng(seed)
    X = np.vstack(
        [
            rng.normal(size=(n_majority, d)),
            rng.normal(loc=gap, size=(n_minority, d)),
        ]
    )
    y = np.array([0] * n_majority + [1] * n_minority)
    return Dataset(
        X=X,
        y=y,
        schema=schema or FeatureSchema.generic(d),
        ids=np.arange(len(y)),
    )


@pytest.fixture(scope="session")
def sim_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cohort") / "simulated.csv"
    write_simulated_csv(path, seed=DATA_SEED)
    return path


@pytest.fixture(scope="session")
def sim_dataset(sim_csv):
    from metspredict.ingest import preprocess

    return preprocess(sim_csv)


@pytest.fixture(scope="session")
def sim_split(sim_dataset):
    from metspredict.ingest import split_balanced

    return split_balanced(sim_dataset, 0.33, seed=SPLIT_SEED)
