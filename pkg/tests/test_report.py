from dataclasses import replace
from pathlib import Path

import pandas as pd
import pytest

from fair_reductions.dataset import DatasetSchema, TrainingSet, load_csv
from fair_reductions.expgrad import GapRecord
from fair_reductions.gridsearch import GridPointResult
from fair_reductions.learners import ConstantClassifier
from fair_reductions.report import (
    RUN_STATUS_FAILED,
    RunRecord,
    categorical_columns,
    convex_envelope,
    run_columns,
    run_frontier,
    write_frontier,
    write_grid,
    write_jsonl,
    write_runs,
    write_timings,
    write_trace,
    write_training_set,
)

FIXTURES = Path(__file__).parent / "fixtures"


def _record(run_id: str, train: tuple[float, float], test: tuple[float, float]) -> RunRecord:
    return RunRecord(
        run_id=run_id,
        command="sweep",
        constraint="dp",
        learner="threshold1d",
        eps=0.01,
        eps_source="flag",
        seed=1,
        B=2.0,
        nu=0.05,
        eta=0.5,
        max_iter=100,
        train_error=train[0],
        train_violation=train[1],
        test_error=test[0],
        test_violation=test[1],
    )


@pytest.fixture
def records() -> list[RunRecord]:
    failed = replace(_record("sweep-003", (0.0, 0.0), (0.0, 0.0)), status=RUN_STATUS_FAILED, message="boom")
    return [
        _record("sweep-000", (0.3, 0.0), (0.32, 0.02)),
        _record("sweep-001", (0.2, 0.1), (0.25, 0.01)),
        _record("sweep-002", (0.25, 0.2), (0.2, 0.3)),
        failed,
    ]


def test_run_columns() -> None:
    columns = run_columns()

    assert columns[:4] == ["run_id", "command", "constraint", "learner"]
    assert columns[-3:] == ["model_path", "status", "message"]
    assert "wall_seconds" not in columns


def test_write_runs_is_deterministic(tmp_path: Path, records: list[RunRecord]) -> None:
    write_runs(records, tmp_path / "first.csv")
    write_runs([replace(r, wall_seconds=r.wall_seconds + 12.5) for r in records], tmp_path / "second.csv")

    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()

    frame = pd.read_csv(tmp_path / "first.csv")
    assert list(frame.columns) == run_columns()
    assert frame["status"].tolist() == ["ok", "ok", "ok", "failed"]


def test_write_timings(tmp_path: Path, records: list[RunRecord]) -> None:
    write_timings([replace(records[0], wall_seconds=1.5)], tmp_path / "timings.csv")

    assert (tmp_path / "timings.csv").read_text() == "run_id,wall_seconds\nsweep-000,1.5\n"


def test_run_frontier(records: list[RunRecord]) -> None:
    assert [r.run_id for r in run_frontier(records, "train")] == ["sweep-000", "sweep-001"]
    # sweep-002 has the best test error but is not on the train frontier
    assert [r.run_id for r in run_frontier(records, "test")] == ["sweep-001"]


def test_write_frontier(tmp_path: Path, records: list[RunRecord]) -> None:
    write_frontier(records, "train", tmp_path / "frontier_train.csv")
    frame = pd.read_csv(tmp_path / "frontier_train.csv")

    assert list(frame.columns) == ["run_id", "eps", "error", "violation", "on_envelope"]
    assert frame["run_id"].tolist() == ["sweep-000", "sweep-001"]
    assert frame["on_envelope"].tolist() == [True, True]


def test_convex_envelope() -> None:
    points = [(0.25, 0.05), (0.3, 0.0), (0.05, 0.3), (0.1, 0.1), (0.4, 0.2)]
    envelope = convex_envelope(points, lambda p: p)

    assert envelope == [(0.3, 0.0), (0.1, 0.1), (0.05, 0.3)]


def test_write_trace(tmp_path: Path) -> None:
    history = [GapRecord(1, 0.5, 0.3, 0.8, 0.2, 0.1, 4.0), GapRecord(2, 0.25, 0.3, 0.5, 0.25, 0.0, 2.5)]
    write_trace(history, tmp_path / "trace.csv")

    frame = pd.read_csv(tmp_path / "trace.csv")
    assert list(frame.columns) == ["t", "nu_t", "L", "L_upper", "L_lower", "max_violation", "envelope"]
    assert frame["nu_t"].tolist() == [0.5, 0.25]


def test_write_grid(tmp_path: Path) -> None:
    h = ConstantClassifier(n_features=2)
    results = [GridPointResult((-1.0,), h, 0.5, 0.0), GridPointResult((1.0,), h, 0.25, 0.125, 0.375, 0.25)]
    write_grid(results, ["delta_a"], tmp_path / "grid.csv")

    frame = pd.read_csv(tmp_path / "grid.csv")
    assert list(frame.columns) == [
        "delta_a",
        "train_error",
        "train_violation",
        "test_error",
        "test_violation",
        "classifier",
    ]
    assert frame["delta_a"].tolist() == [-1.0, 1.0]
    assert frame["test_error"].isna().tolist() == [True, False]


def test_write_jsonl(tmp_path: Path) -> None:
    write_jsonl([{"run_id": "train", "eps": 0.5}, {"run_id": "x"}], tmp_path / "runs.jsonl")

    assert (tmp_path / "runs.jsonl").read_text() == '{"run_id": "train", "eps": 0.5}\n{"run_id": "x"}\n'


def test_write_training_set_round_trip(tmp_path: Path) -> None:
    schema = DatasetSchema(label_column="income", protected_column="sex", categorical_columns=["workclass"])
    ts = load_csv(FIXTURES / "people.csv", schema)

    assert categorical_columns(ts) == ["sex", "workclass"]

    write_training_set(ts, tmp_path / "train.csv")
    reloaded = load_csv(tmp_path / "train.csv", schema)

    assert reloaded.same_as(ts)
    assert list(pd.read_csv(tmp_path / "train.csv").columns) == ["age", "sex", "hours", "workclass", "income"]


def test_write_training_set_numeric_only(tmp_path: Path) -> None:
    ts = TrainingSet.from_arrays([[0.125, -2.0], [3.5, 1e-3]], ["a", "b"], [1, 0])
    write_training_set(ts, tmp_path / "train.csv")

    reloaded = load_csv(tmp_path / "train.csv", DatasetSchema(label_column="label", protected_column="group"))
    assert reloaded.features[:, :2].tolist() == ts.features.tolist()
    assert reloaded.protected.tolist() == ["a", "b"]
    assert reloaded.labels.tolist() == [1, 0]
