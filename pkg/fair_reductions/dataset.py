"""Dataset ingestion, encoding and splitting."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Any, Self

import numpy as np
import numpy.typing as npt
import pandas as pd

from .exceptions import ArgumentError, EmptyInputError, MissingColumnError, ParseError, SchemaError

_LOGGER = logging.getLogger(__name__)

ONE_HOT_SEPARATOR = "="


@dataclass(frozen=True)
class DatasetSchema:
    label_column: str
    protected_column: str
    categorical_columns: list[str] = field(default_factory=list)
    drop_columns: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.label_column == self.protected_column:
            raise SchemaError("label and protected columns must differ", self.label_column)

        # the protected column is one-hot encoded anyway, so listing it as categorical is allowed
        listed = [
            self.label_column,
            self.protected_column,
            *[c for c in self.categorical_columns if c != self.protected_column],
            *self.drop_columns,
        ]
        for column in listed:
            if listed.count(column) > 1:
                raise SchemaError(f"column {column!r} listed twice", column)


@dataclass(frozen=True)
class Standardization:
    columns: list[int]
    means: list[float]
    scales: list[float]

    def apply(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        if not self.columns:
            return features

        rv = features.copy()
        rv[:, self.columns] = (rv[:, self.columns] - np.array(self.means)) / np.array(self.scales)
        return rv


@dataclass(frozen=True, eq=False)
class TrainingSet:
    features: npt.NDArray[np.float64]
    protected: npt.NDArray[np.object_]
    labels: npt.NDArray[np.int64]
    feature_names: list[str]
    attribute_values: list[Any]
    protected_name: str = "group"
    label_name: str = "label"
    standardization: Standardization | None = None

    def __post_init__(self) -> None:
        n = len(self.labels)
        if n < 1:
            raise EmptyInputError("training set has no rows")

        if self.features.ndim != 2 or self.features.shape[0] != n or len(self.protected) != n:
            raise ArgumentError("features, protected and labels must have the same number of rows")

        if self.features.shape[1] != len(self.feature_names):
            raise ArgumentError("feature_names does not match the feature matrix width")

        if not self.attribute_values:
            raise ArgumentError("attribute_values must not be empty")

        if not set(self.protected.tolist()) <= set(self.attribute_values):
            raise ArgumentError("protected vector holds values missing from attribute_values")

        if not np.isin(self.labels, (0, 1)).all():
            raise ArgumentError("labels must be 0 or 1")

        for array in (self.features, self.protected, self.labels):
            array.setflags(write=False)

    @classmethod
    def from_arrays(
        cls,
        features: Any,
        protected: Any,
        labels: Any,
        feature_names: list[str] | None = None,
    ) -> Self:
        features_array = np.asarray(features, dtype=np.float64)
        if features_array.ndim == 1:
            features_array = features_array.reshape(-1, 1)

        protected_array = np.asarray(protected, dtype=object)
        return cls(
            features=features_array,
            protected=protected_array,
            labels=np.asarray(labels, dtype=np.int64),
            feature_names=feature_names or [f"x{i}" for i in range(features_array.shape[1])],
            attribute_values=list(dict.fromkeys(protected_array.tolist())),
        )

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def group_mask(self, value: Any) -> npt.NDArray[np.bool_]:
        return np.asarray(self.protected == value, dtype=bool)

    def subset(self, rows: npt.NDArray[np.int64]) -> TrainingSet:
        protected = self.protected[rows]
        present = set(protected.tolist())
        return TrainingSet(
            features=self.features[rows].copy(),
            protected=protected.copy(),
            labels=self.labels[rows].copy(),
            feature_names=list(self.feature_names),
            attribute_values=[v for v in self.attribute_values if v in present],
            protected_name=self.protected_name,
            label_name=self.label_name,
            standardization=self.standardization,
        )

    def same_as(self, other: TrainingSet) -> bool:
        return (
            self.feature_names == other.feature_names
            and [str(v) for v in self.attribute_values] == [str(v) for v in other.attribute_values]
            and np.array_equal(self.features, other.features)
            and [str(v) for v in self.protected] == [str(v) for v in other.protected]
            and np.array_equal(self.labels, other.labels)
        )


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise ArgumentError(f"data file {str(path)!r} does not exist")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"{path} is empty")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(f"cannot parse {path}: {e}")

    if frame.empty:
        raise EmptyInputError(f"{path} has no data rows")

    return frame


def read_columns(path: str | Path) -> list[str]:
    return [str(c) for c in _read_frame(Path(path)).columns]


def _check_missing_cells(frame: pd.DataFrame) -> None:
    blank = frame.apply(lambda column: column.str.strip() == "")
    if blank.to_numpy().any():
        row, col = np.argwhere(blank.to_numpy())[0]
        raise ParseError(f"missing value in column {frame.columns[col]!r}", row=int(row))


def _encode_labels(values: pd.Series) -> npt.NDArray[np.int64]:
    tokens = sorted(set(values.tolist()))
    if set(tokens) <= {"0", "1"}:
        return values.astype(np.int64).to_numpy()

    if len(tokens) > 2:
        raise ParseError(f"label column has {len(tokens)} distinct values, expected 2: {tokens[:5]}")

    mapping = {token: idx for idx, token in enumerate(tokens)}
    _LOGGER.debug(f"Label tokens mapped by sort order: {mapping}")
    return values.map(mapping).astype(np.int64).to_numpy()


def _numeric_column(frame: pd.DataFrame, column: str) -> npt.NDArray[np.float64]:
    parsed = pd.to_numeric(frame[column], errors="coerce")
    bad = parsed.isna().to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise ParseError(f"unparseable numeric value {frame[column].iloc[row]!r} in column {column!r}", row=row)

    return parsed.to_numpy(dtype=np.float64)


def load_csv(path: str | Path, schema: DatasetSchema) -> TrainingSet:
    frame = _read_frame(Path(path))
    for column in [schema.label_column, schema.protected_column, *schema.categorical_columns, *schema.drop_columns]:
        if column not in frame.columns:
            raise MissingColumnError(column)

    _check_missing_cells(frame)

    labels = _encode_labels(frame[schema.label_column])
    protected = frame[schema.protected_column].to_numpy(dtype=object)
    attribute_values = list(dict.fromkeys(protected.tolist()))

    categorical = set(schema.categorical_columns) | {schema.protected_column}
    blocks: list[npt.NDArray[np.float64]] = []
    names: list[str] = []
    for column in frame.columns:
        if column in (schema.label_column, *schema.drop_columns):
            continue

        if column in categorical:
            levels = list(dict.fromkeys(frame[column].tolist()))
            for level in levels:
                blocks.append((frame[column] == level).to_numpy(dtype=np.float64))
                names.append(f"{column}{ONE_HOT_SEPARATOR}{level}")
        else:
            blocks.append(_numeric_column(frame, column))
            names.append(column)

    features = np.column_stack(blocks) if blocks else np.zeros((len(frame), 0))
    ts = TrainingSet(
        features=features,
        protected=protected,
        labels=labels,
        feature_names=names,
        attribute_values=attribute_values,
        protected_name=schema.protected_column,
        label_name=schema.label_column,
    )
    _LOGGER.info(f"Loaded {ts.n} rows, {ts.d} features, {len(attribute_values)} groups from {path}")

    return ts


def fit_standardization(ts: TrainingSet, columns: list[int] | None = None) -> Standardization:
    if columns is None:
        columns = numeric_columns(ts)

    means = ts.features[:, columns].mean(axis=0) if columns else np.zeros(0)
    scales = ts.features[:, columns].std(axis=0) if columns else np.zeros(0)
    scales = np.where(scales > 0, scales, 1.0)
    return Standardization(columns=list(columns), means=means.tolist(), scales=scales.tolist())


def standardize_features(ts: TrainingSet, standardization: Standardization) -> TrainingSet:
    return TrainingSet(
        features=standardization.apply(ts.features),
        protected=ts.protected,
        labels=ts.labels,
        feature_names=ts.feature_names,
        attribute_values=ts.attribute_values,
        protected_name=ts.protected_name,
        label_name=ts.label_name,
        standardization=standardization,
    )


def numeric_columns(ts: TrainingSet) -> list[int]:
    return [idx for idx, name in enumerate(ts.feature_names) if ONE_HOT_SEPARATOR not in name]


def split(ts: TrainingSet, train_fraction: float, seed: int) -> tuple[TrainingSet, TrainingSet]:
    """Random train/test partition with sizes ceil(f*n) and n - ceil(f*n).

    When both labels are present, one swap in the permutation ensures the train part
    holds at least one row of each label if its size allows it.
    """
    if not 0 < train_fraction < 1:
        raise ArgumentError(f"train fraction must lie in (0, 1), got {train_fraction}")

    n_train = math.ceil(train_fraction * ts.n)
    if n_train >= ts.n:
        raise ArgumentError(f"train fraction {train_fraction} leaves no test rows out of {ts.n}")

    order = np.random.default_rng(seed).permutation(ts.n)
    if n_train >= 2 and len(set(ts.labels.tolist())) == 2:
        order = _ensure_both_labels(order, ts.labels, n_train)

    return ts.subset(np.sort(order[:n_train])), ts.subset(np.sort(order[n_train:]))


def _ensure_both_labels(
    order: npt.NDArray[np.int64], labels: npt.NDArray[np.int64], n_train: int
) -> npt.NDArray[np.int64]:
    train_labels = set(labels[order[:n_train]].tolist())
    if len(train_labels) == 2:
        return order

    missing = 1 - train_labels.pop()
    swap = n_train + int(np.argmax(labels[order[n_train:]] == missing))
    order = order.copy()
    order[n_train - 1], order[swap] = order[swap], order[n_train - 1]
    return order
