import numpy as np
import pandas as pd
import pytest

from biasadjust import Dataset, case_study_schema
from biasadjust.simgen import generate_ideal, realistic_scenario, to_observed


@pytest.fixture(scope="session")
def schema():
    return case_study_schema()


@pytest.fixture(scope="session")
def observed_small():
    """A realistic-scenario observed dataset of modest size."""
    ideal = generate_ideal(realistic_scenario(), seed=314, n=4000)
    return to_observed(ideal)


@pytest.fixture(scope="session")
def ideal_small():
    return generate_ideal(realistic_scenario(), seed=314, n=4000)


def make_binary_dataset(a_star, y_star, schema=None, r_y=None, **extra):
    """Tiny dataset with zeroed confounders for engine-level unit tests."""
    schema = case_study_schema() if schema is None else schema
    n = len(a_star)
    frame = pd.DataFrame({name: np.zeros(n) for name in schema.names})
    frame["a_star"] = np.asarray(a_star, float)
    frame["r_y"] = np.ones(n) if r_y is None else np.asarray(r_y, float)
    ys = np.asarray(y_star, float).copy()
    ys[frame["r_y"].to_numpy() == 0] = np.nan
    frame["y_star"] = ys
    for k, v in extra.items():
        frame[k] = np.asarray(v, float)
    return Dataset(schema, frame)
