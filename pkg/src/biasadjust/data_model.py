"""Record schema, dataset container and design-matrix construction.

A dataset is a pandas DataFrame wrapped together with a confounder schema.
Confounders are stored as numeric columns (binary 0/1, categorical integer
codes with 0 as the reference level, continuous floats).  Exposure/outcome
columns follow a fixed naming convention:

    a_star, y_star, r_y          observed (analysis-mode) fields
    a_true, y_true, u, e, s      latent fields, present in synthetic-ideal data

Missing values (y_star when r_y = 0, latent fields in analysis mode) are NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

INTERCEPT = "(intercept)"

OBSERVED_COLUMNS = ("a_star", "y_star", "r_y")
LATENT_COLUMNS = ("a_true", "y_true", "u", "e", "s")


class SchemaError(ValueError):
    """Raised when a dataset or term list does not match the schema."""


@dataclass(frozen=True)
class Covariate:
    """One confounder descriptor.

    kind is "binary", "categorical" or "continuous".  Categorical covariates
    carry K >= 2 level labels; the first label is the reference level and the
    stored codes are 0..K-1 in label order.
    """

    name: str
    kind: str
    levels: tuple[str, ...] | None = None
    units: str | None = None

    def __post_init__(self):
        if self.kind not in ("binary", "categorical", "continuous"):
            raise SchemaError(f"unknown covariate kind {self.kind!r}")
        if self.kind == "categorical":
            if self.levels is None or len(self.levels) < 2:
                raise SchemaError(f"categorical covariate {self.name!r} needs >= 2 levels")
        elif self.levels is not None:
            raise SchemaError(f"covariate {self.name!r} of kind {self.kind} cannot have levels")

    @property
    def n_levels(self) -> int:
        return len(self.levels) if self.levels is not None else 2

    def design_labels(self) -> list[str]:
        """Design-column labels this covariate expands to."""
        if self.kind == "categorical":
            return [f"{self.name}_{k + 1}" for k in range(1, self.n_levels)]
        return [self.name]


@dataclass(frozen=True)
class ConfounderSchema:
    covariates: tuple[Covariate, ...]

    def __post_init__(self):
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate covariate names in schema")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.covariates]

    def __getitem__(self, name: str) -> Covariate:
        for c in self.covariates:
            if c.name == name:
                return c
        raise SchemaError(f"unknown covariate {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.covariates)

    def design_labels(self) -> list[str]:
        """All confounder design labels in schema order."""
        out: list[str] = []
        for c in self.covariates:
            out.extend(c.design_labels())
        return out


def case_study_schema() -> ConfounderSchema:
    """The breastfeeding/asthma confounder set used by the shipped scenarios."""
    return ConfounderSchema((
        Covariate("sex", "binary"),
        Covariate("nsibs", "categorical", ("none", "one", "two", "three")),
        Covariate("lbw", "binary"),
        Covariate("peth", "categorical", ("australian", "asian", "other")),
        Covariate("fma", "binary"),
        Covariate("fpa", "binary"),
        Covariate("fhx", "binary"),
        Covariate("dmode", "binary"),
        Covariate("gage", "binary"),
        Covariate("mage", "continuous", units="years"),
        Covariate("ses", "categorical", ("q1", "q2", "q3", "q4", "q5")),
        Covariate("msmk", "binary"),
    ))


@dataclass(frozen=True)
class Dataset:
    """Immutable record collection conforming to a confounder schema.

    provenance is "observed", "synthetic-ideal" or "synthetic-observed".
    """

    schema: ConfounderSchema
    frame: pd.DataFrame = field(repr=False)
    provenance: str = "observed"

    def __post_init__(self):
        if self.provenance not in ("observed", "synthetic-ideal", "synthetic-observed"):
            raise SchemaError(f"unknown provenance {self.provenance!r}")
        if len(self.frame) < 1:
            raise SchemaError("dataset must contain at least one record")
        missing = [c for c in self.schema.names if c not in self.frame.columns]
        if missing:
            raise SchemaError(f"dataset is missing confounder columns {missing}")
        for col in ("a_star", "r_y"):
            if col not in self.frame.columns:
                raise SchemaError(f"dataset is missing required column {col!r}")
        # y_star present iff r_y = 1 (ideal data keeps y_star everywhere)
        if "y_star" in self.frame.columns and self.provenance != "synthetic-ideal":
            ry = self.frame["r_y"].to_numpy(float)
            ys = self.frame["y_star"].to_numpy(float)
            if np.any(np.isnan(ys) & (ry == 1)) or np.any(~np.isnan(ys) & (ry == 0)):
                raise SchemaError("y_star must be present exactly where r_y = 1")
        self.frame.flags.allows_duplicate_labels = False

    def __len__(self) -> int:
        return len(self.frame)

    def has_column(self, name: str) -> bool:
        return name in self.frame.columns and not self.frame[name].isna().all()

    def column(self, name: str) -> np.ndarray:
        if name not in self.frame.columns:
            raise SchemaError(f"column {name!r} not present in dataset")
        return self.frame[name].to_numpy(float)

    def columns(self) -> dict[str, np.ndarray]:
        return {c: self.frame[c].to_numpy(float) for c in self.frame.columns}

    def replace_frame(self, frame: pd.DataFrame, provenance: str | None = None) -> "Dataset":
        return Dataset(self.schema, frame.reset_index(drop=True),
                       provenance or self.provenance)

    # ---- CSV interchange -------------------------------------------------
    def to_csv(self, path) -> None:
        """Write the interchange CSV (missing values as empty fields)."""
        self.frame.to_csv(path, index=False, na_rep="")

    @classmethod
    def from_csv(cls, path, schema: ConfounderSchema,
                 provenance: str = "observed") -> "Dataset":
        frame = pd.read_csv(path)
        return cls(schema, frame, provenance)


def expand_column(columns: Mapping[str, np.ndarray], schema: ConfounderSchema,
                  label: str) -> np.ndarray:
    """Resolve one design-column label against raw data columns.

    Labels are: "(intercept)", a raw column name, a categorical indicator
    "name_k" (level code k-1 against reference), or an interaction "x:y".
    """
    if label == INTERCEPT:
        n = len(next(iter(columns.values())))
        return np.ones(n)
    if ":" in label:
        left, right = label.split(":", 1)
        return expand_column(columns, schema, left) * expand_column(columns, schema, right)
    if label in columns and not (label in schema and schema[label].kind == "categorical"):
        return np.asarray(columns[label], float)
    # categorical indicator name_k
    base, _, suffix = label.rpartition("_")
    if base in schema and schema[base].kind == "categorical" and suffix.isdigit():
        k = int(suffix)
        if not 2 <= k <= schema[base].n_levels:
            raise SchemaError(f"indicator {label!r} out of range for {base!r}")
        if base not in columns:
            raise SchemaError(f"column {base!r} not present in dataset")
        return (np.asarray(columns[base]) == k - 1).astype(float)
    raise SchemaError(f"unknown design label {label!r}")


def expand_term(columns: Mapping[str, np.ndarray], schema: ConfounderSchema,
                term: str) -> tuple[list[str], list[np.ndarray]]:
    """Expand one term into its design labels and columns.

    A bare categorical name expands to K-1 indicators; anything else is a
    single column resolved by expand_column.
    """
    if term in schema and schema[term].kind == "categorical":
        labels = schema[term].design_labels()
        return labels, [expand_column(columns, schema, lab) for lab in labels]
    return [term], [expand_column(columns, schema, term)]


def design_from_columns(columns: Mapping[str, np.ndarray], schema: ConfounderSchema,
                        terms: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    """Build a design matrix (intercept first) from raw data columns."""
    labels = [INTERCEPT]
    n = len(next(iter(columns.values())))
    cols = [np.ones(n)]
    for term in terms:
        labs, arrs = expand_term(columns, schema, term)
        labels.extend(labs)
        cols.extend(arrs)
    X = np.column_stack(cols)
    bad = [lab for lab, col in zip(labels, X.T) if np.any(np.isnan(col))]
    if bad:
        raise SchemaError(f"design columns {bad} contain missing values")
    return X, labels


def build_design_matrix(dataset: Dataset, terms: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    """Design matrix for a dataset: one row per record, intercept first.

    Categorical terms expand to K-1 indicators against the reference level;
    "x:y" denotes an interaction of two fields.
    """
    return design_from_columns(dataset.columns(), dataset.schema, terms)


def apply_linear_model(columns: Mapping[str, np.ndarray], schema: ConfounderSchema,
                       coefficients: Mapping[str, float]) -> np.ndarray:
    """Linear predictor of a term-keyed coefficient mapping."""
    n = len(next(iter(columns.values())))
    eta = np.zeros(n)
    for label, value in coefficients.items():
        if not np.isfinite(value):
            raise ValueError(f"non-finite coefficient for {label!r}")
        eta += value * expand_column(columns, schema, label)
    return eta
