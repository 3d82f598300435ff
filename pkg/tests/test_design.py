"""Schema, dataset container and design-matrix tests."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from biasadjust.data_model import (ConfounderSchema, Covariate, Dataset,
                                   INTERCEPT, SchemaError, apply_linear_model,
                                   build_design_matrix, case_study_schema)

from conftest import make_binary_dataset


def simple_schema():
    return ConfounderSchema((Covariate("x", "binary"),))


def test_schema_rejects_duplicates():
    with pytest.raises(SchemaError):
        ConfounderSchema((Covariate("x", "binary"), Covariate("x", "binary")))


def test_categorical_needs_two_levels():
    with pytest.raises(SchemaError):
        Covariate("c", "categorical", ("only",))


def test_case_study_schema_layout():
    schema = case_study_schema()
    assert schema.names == ["sex", "nsibs", "lbw", "peth", "fma", "fpa",
                            "fhx", "dmode", "gage", "mage", "ses", "msmk"]
    assert schema["ses"].n_levels == 5
    assert schema["mage"].kind == "continuous"
    labels = schema.design_labels()
    assert labels.count("ses_2") == 1 and "ses_5" in labels and "ses_1" not in labels


def test_single_binary_covariate_design():
    schema = simple_schema()
    frame = pd.DataFrame({"x": [0.0, 1.0, 1.0], "a_star": [0.0, 1.0, 0.0],
                          "r_y": [1.0, 1.0, 1.0]})
    ds = Dataset(schema, frame)
    X, labels = build_design_matrix(ds, ["x"])
    assert labels == [INTERCEPT, "x"]
    np.testing.assert_array_equal(X, [[1, 0], [1, 1], [1, 1]])


def test_ses_expands_to_four_indicators(observed_small):
    X, labels = build_design_matrix(observed_small, ["ses"])
    assert labels == [INTERCEPT, "ses_2", "ses_3", "ses_4", "ses_5"]
    ses = observed_small.column("ses")
    np.testing.assert_array_equal(X[:, 1], (ses == 1).astype(float))
    np.testing.assert_array_equal(X[:, 4], (ses == 4).astype(float))


def test_interaction_row():
    ds = make_binary_dataset([1.0], [1.0])
    X, labels = build_design_matrix(ds, ["a_star", "y_star", "a_star:y_star"])
    assert labels == [INTERCEPT, "a_star", "y_star", "a_star:y_star"]
    np.testing.assert_array_equal(X, [[1, 1, 1, 1]])


def test_unknown_term_errors(observed_small):
    with pytest.raises(SchemaError):
        build_design_matrix(observed_small, ["not_a_field"])


def test_latent_field_absent_in_observed_data(observed_small):
    with pytest.raises(SchemaError):
        build_design_matrix(observed_small, ["u"])


def test_missing_outcome_rows_rejected_in_design(observed_small):
    # y_star carries missing values where r_y = 0; using it unrestricted fails
    with pytest.raises(SchemaError):
        build_design_matrix(observed_small, ["y_star"])


def test_design_is_pure(observed_small):
    X1, l1 = build_design_matrix(observed_small, ["a_star", "ses", "mage"])
    X2, l2 = build_design_matrix(observed_small, ["a_star", "ses", "mage"])
    assert l1 == l2
    assert np.array_equal(X1, X2)


def test_dataset_requires_confounders():
    frame = pd.DataFrame({"a_star": [1.0], "r_y": [1.0]})
    with pytest.raises(SchemaError):
        Dataset(case_study_schema(), frame)


def test_y_star_must_match_r_y():
    with pytest.raises(SchemaError):
        make_binary_dataset([1.0, 0.0], [1.0, np.nan], r_y=[1.0, 1.0])


def test_csv_round_trip(tmp_path, observed_small):
    path = tmp_path / "data.csv"
    observed_small.to_csv(path)
    back = Dataset.from_csv(path, observed_small.schema, "synthetic-observed")
    pd.testing.assert_frame_equal(back.frame, observed_small.frame)


def test_csv_missing_values_are_empty_fields(tmp_path, observed_small):
    path = tmp_path / "data.csv"
    observed_small.to_csv(path)
    header, *rows = path.read_text().splitlines()
    idx = header.split(",").index("y_star")
    ry_idx = header.split(",").index("r_y")
    missing_rows = [r for r in rows if float(r.split(",")[ry_idx]) == 0.0]
    assert missing_rows and all(r.split(",")[idx] == "" for r in missing_rows)


def test_apply_linear_model_matches_design(observed_small):
    cols = observed_small.columns()
    coef = {INTERCEPT: 0.3, "a_star": -0.2, "ses_3": 0.7, "mage": 0.01}
    eta = apply_linear_model(cols, observed_small.schema, coef)
    expected = (0.3 - 0.2 * cols["a_star"] + 0.7 * (cols["ses"] == 2)
                + 0.01 * cols["mage"])
    np.testing.assert_allclose(eta, expected, atol=1e-12)


def test_apply_linear_model_rejects_nonfinite(observed_small):
    with pytest.raises(ValueError):
        apply_linear_model(observed_small.columns(), observed_small.schema,
                           {INTERCEPT: np.inf})


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["sex", "ses", "mage", "a_star", "msmk"]),
                min_size=1, max_size=4, unique=True))
def test_design_labels_deterministic(observed_small, terms):
    X1, l1 = build_design_matrix(observed_small, terms)
    X2, l2 = build_design_matrix(observed_small, terms)
    assert l1 == l2 and l1[0] == INTERCEPT
    assert np.array_equal(X1, X2)
