from pathlib import Path

import numpy as np
import pytest

from fair_reductions.dataset import (
    DatasetSchema,
    TrainingSet,
    fit_standardization,
    load_csv,
    numeric_columns,
    split,
    standardize_features,
)
from fair_reductions.exceptions import (
    ArgumentError,
    EmptyInputError,
    MissingColumnError,
    ParseError,
    SchemaError,
)

from .conftest import disparity_set

FIXTURES = Path(__file__).parent / "fixtures"
PEOPLE_SCHEMA = DatasetSchema(label_column="income", protected_column="sex", categorical_columns=["workclass"])


def test_load_csv() -> None:
    ts = load_csv(FIXTURES / "people.csv", PEOPLE_SCHEMA)

    assert ts.n == 6
    assert ts.feature_names == [
        "age",
        "sex=Male",
        "sex=Female",
        "hours",
        "workclass=Private",
        "workclass=Gov",
        "workclass=Self-emp",
    ]
    assert ts.attribute_values == ["Male", "Female"]
    assert ts.protected.tolist() == ["Male", "Female", "Female", "Male", "Male", "Female"]
    assert ts.labels.tolist() == [0, 1, 0, 1, 1, 0]
    assert ts.protected_name == "sex"
    assert ts.label_name == "income"
    assert ts.features[:, 0].tolist() == [25, 38, 28, 44, 52, 31]


def test_load_csv_one_hot_blocks() -> None:
    ts = load_csv(FIXTURES / "people.csv", PEOPLE_SCHEMA)
    assert (ts.features[:, 1:3].sum(axis=1) == 1).all()
    assert (ts.features[:, 4:7].sum(axis=1) == 1).all()


def test_load_csv_protected_listed_as_categorical(tmp_path: Path) -> None:
    path = tmp_path / "small.csv"
    path.write_text("x,sex,y\n0.5,F,0\n1.5,M,1\n2.5,F,1\n3.5,M,0\n")

    ts = load_csv(path, DatasetSchema(label_column="y", protected_column="sex", categorical_columns=["sex"]))
    assert ts.n == 4
    assert ts.d == 1 + 2


def test_load_csv_missing_column() -> None:
    with pytest.raises(MissingColumnError) as e:
        load_csv(FIXTURES / "people.csv", DatasetSchema(label_column="y", protected_column="sex"))

    assert e.value.column == "y"
    assert "'y'" in str(e.value)


def test_load_csv_blank_cell() -> None:
    with pytest.raises(ParseError) as e:
        load_csv(FIXTURES / "blank_cell.csv", DatasetSchema(label_column="label", protected_column="group"))

    assert e.value.row == 1
    assert str(e.value).endswith("(row 1)")


def test_load_csv_unparseable_number(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("x,group,label\n1.0,a,0\n2.0,b,1\nabc,a,1\n")

    with pytest.raises(ParseError) as e:
        load_csv(path, DatasetSchema(label_column="label", protected_column="group"))

    assert e.value.row == 2


def test_load_csv_empty() -> None:
    with pytest.raises(EmptyInputError):
        load_csv(FIXTURES / "empty.csv", DatasetSchema(label_column="label", protected_column="group"))


def test_load_csv_too_many_label_tokens(tmp_path: Path) -> None:
    path = tmp_path / "labels.csv"
    path.write_text("x,group,label\n1,a,low\n2,b,mid\n3,a,high\n")

    with pytest.raises(ParseError):
        load_csv(path, DatasetSchema(label_column="label", protected_column="group"))


def test_schema_validation() -> None:
    with pytest.raises(SchemaError):
        DatasetSchema(label_column="y", protected_column="y")

    with pytest.raises(SchemaError):
        DatasetSchema(label_column="y", protected_column="a", categorical_columns=["c"], drop_columns=["c"])


def test_training_set_validation() -> None:
    with pytest.raises(ArgumentError):
        TrainingSet.from_arrays([0.0, 1.0], ["a", "b"], [0, 2])

    with pytest.raises(ArgumentError):
        TrainingSet.from_arrays([0.0, 1.0, 2.0], ["a", "b"], [0, 1, 1])

    with pytest.raises(EmptyInputError):
        TrainingSet.from_arrays(np.zeros((0, 1)), [], [])


def test_training_set_is_read_only(d4: TrainingSet) -> None:
    with pytest.raises(ValueError):
        d4.features[0, 0] = 5.0


def test_split_sizes_and_partition() -> None:
    ts = disparity_set(100)
    train, test = split(ts, 0.75, seed=1)

    assert (train.n, test.n) == (75, 25)
    rows = np.concatenate([train.features[:, 0], test.features[:, 0]])
    assert sorted(rows.tolist()) == sorted(ts.features[:, 0].tolist())


def test_split_deterministic() -> None:
    ts = disparity_set(100)
    first, _ = split(ts, 0.75, seed=1)
    second, _ = split(ts, 0.75, seed=1)
    other, _ = split(ts, 0.75, seed=2)

    assert first.same_as(second)
    assert not first.same_as(other)


@pytest.mark.parametrize("fraction", [0.0, 1.0, 1.5, -0.2])
def test_split_bad_fraction(d4: TrainingSet, fraction: float) -> None:
    with pytest.raises(ArgumentError):
        split(d4, fraction, seed=1)


def test_split_keeps_both_labels() -> None:
    ts = TrainingSet.from_arrays([0.0, 1.0, 2.0, 3.0], ["a", "b", "a", "b"], [0, 0, 0, 1])
    for seed in range(20):
        train, _ = split(ts, 0.5, seed=seed)
        assert sorted(set(train.labels.tolist())) == [0, 1]


def test_standardization() -> None:
    ts = load_csv(FIXTURES / "people.csv", PEOPLE_SCHEMA)
    standardization = fit_standardization(ts)

    assert standardization.columns == numeric_columns(ts) == [0, 3]

    scaled = standardize_features(ts, standardization)
    assert scaled.standardization == standardization
    np.testing.assert_allclose(scaled.features[:, [0, 3]].mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(scaled.features[:, [0, 3]].std(axis=0), 1.0)
    assert np.array_equal(scaled.features[:, [1, 2, 4, 5, 6]], ts.features[:, [1, 2, 4, 5, 6]])


def test_standardization_constant_column() -> None:
    ts = TrainingSet.from_arrays([[1.0, 2.0], [1.0, 4.0]], ["a", "b"], [0, 1])
    standardization = fit_standardization(ts)

    assert standardization.scales[0] == 1.0
    assert standardize_features(ts, standardization).features[:, 0].tolist() == [0.0, 0.0]
